"""polarcone: sticky-particle transport, monotone-cone projections, and
PSD stress-field recovery on grids.

Layout
------
cone         1d machinery: weighted isotonic projection, sticky evolution,
             polar-cone certificates.
deformation  grids, symmetric gradients of test deformations, monotone
             test families, the force/deformation functional.
recovery     constraint assembly, PSD stress-field recovery, the conic
             support gauge, and the flow-based instance generator.
io           JSON/CSV serialization for states, problems, and results.
cli          ``polarcone`` command-line front end.
"""

import os as _os

# POLARCONE_THREADS caps BLAS/OpenMP parallelism; it must land in the
# environment before numpy loads its BLAS, hence before any submodule import.
_threads = _os.environ.get("POLARCONE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

__version__ = "0.1.0"

from .backend import BACKEND, HAVE_EXTENSION
from .cone import (
    DiscreteMeasure,
    MonotoneMap1D,
    PolarCertificate1D,
    StickyState,
    is_monotone_map,
    lagrangian_velocity,
    nonneg_primitive,
    polar_membership_1d,
    polar_residual,
    project_monotone_1d,
    push_forward,
    sticky_evolve,
)
from .deformation import (
    Grid,
    InequalityReport,
    MatrixMeasureField,
    TestDeformation,
    VectorMeasure,
    check_inequality,
    deformation_tensor,
    evaluate_G,
    identity_deformation,
    monotone_test_family,
)
from .recovery import (
    InfeasibleError,
    RecoveryResult,
    RepresentationProblem,
    SolverOptions,
    VerificationReport,
    assemble_constraints,
    hat_basis,
    instance_from_flow,
    recover_stress,
    riedl_gauge,
    verify_representation,
)

__all__ = [
    "BACKEND",
    "HAVE_EXTENSION",
    "DiscreteMeasure",
    "MonotoneMap1D",
    "PolarCertificate1D",
    "StickyState",
    "project_monotone_1d",
    "sticky_evolve",
    "lagrangian_velocity",
    "push_forward",
    "polar_residual",
    "polar_membership_1d",
    "nonneg_primitive",
    "is_monotone_map",
    "Grid",
    "TestDeformation",
    "VectorMeasure",
    "MatrixMeasureField",
    "InequalityReport",
    "deformation_tensor",
    "monotone_test_family",
    "evaluate_G",
    "check_inequality",
    "RepresentationProblem",
    "RecoveryResult",
    "SolverOptions",
    "VerificationReport",
    "InfeasibleError",
    "assemble_constraints",
    "hat_basis",
    "identity_deformation",
    "recover_stress",
    "verify_representation",
    "riedl_gauge",
    "instance_from_flow",
    "__version__",
]
