"""Kernel backend selection: compiled extension if available, numpy otherwise.

``BACKEND`` names the active implementation.  Both implementations are
importable directly (``polarcone._core`` / ``polarcone._core_py``) for the
cross-checks in tests/ and the benchmark in benchmarks/.
"""

import numpy as np

try:
    from . import _core as _impl

    HAVE_EXTENSION = True
except ImportError:  # source tree without a built extension
    from . import _core_py as _impl

    HAVE_EXTENSION = False

from . import _core_py as _pure

BACKEND = "compiled" if HAVE_EXTENSION else "python"

pava = _impl.pava
pava_lex = _impl.pava_lex


def psd_project_cells(a):
    """Project each (d, d) cell of ``a`` onto the PSD cone (d <= 3)."""
    a = np.asarray(a, dtype=np.float64)
    if HAVE_EXTENSION and a.shape[-1] <= 2:
        return _impl.psd_project_cells(a)
    return _pure.psd_project_cells(a)
