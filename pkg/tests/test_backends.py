"""Compiled and pure kernels must agree bitwise; both must be correct."""

import numpy as np
import pytest

from polarcone import _core_py
from polarcone import backend

compiled = pytest.mark.skipif(
    not backend.HAVE_EXTENSION, reason="compiled extension not built"
)


def random_cases(rng, count=30):
    for _ in range(count):
        n = int(rng.integers(1, 200))
        y = rng.normal(size=n) * rng.uniform(0.1, 100)
        v = rng.normal(size=n)
        w = rng.uniform(1e-3, 10.0, n)
        yield y, v, w


@compiled
class TestBackendsAgree:
    def test_pava_bitwise(self):
        from polarcone import _core

        rng = np.random.default_rng(0)
        for y, _, w in random_cases(rng):
            xc, bc = _core.pava(y, w)
            xp, bp = _core_py.pava(y, w)
            assert np.array_equal(xc, xp)
            assert np.array_equal(bc, bp)

    def test_pava_lex_bitwise(self):
        from polarcone import _core

        rng = np.random.default_rng(1)
        for y, v, w in random_cases(rng):
            # quantize positions so exact ties actually occur
            yq = np.round(y * 4) / 4
            xc, vc, bc = _core.pava_lex(yq, v, w)
            xp, vp, bp = _core_py.pava_lex(yq, v, w)
            assert np.array_equal(xc, xp)
            assert np.array_equal(vc, vp)
            assert np.array_equal(bc, bp)

    def test_psd_projection_bitwise(self):
        from polarcone import _core

        rng = np.random.default_rng(2)
        for d in (1, 2):
            a = rng.normal(size=(500, d, d))
            a = 0.5 * (a + np.swapaxes(a, -1, -2))
            assert np.array_equal(
                _core.psd_project_cells(a), _core_py.psd_project_cells(a)
            )


class TestPsdProjectionCorrect:
    def check(self, fn, d, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(200, d, d))
        a = 0.5 * (a + np.swapaxes(a, -1, -2))
        out = fn(a)
        lam, q = np.linalg.eigh(a)
        want = np.einsum("kij,kj,klj->kil", q, np.clip(lam, 0.0, None), q)
        np.testing.assert_allclose(out, want, atol=1e-12)
        assert np.linalg.eigvalsh(out).min() >= -1e-12

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_pure(self, d):
        self.check(_core_py.psd_project_cells, d, seed=3 + d)

    @compiled
    @pytest.mark.parametrize("d", [1, 2])
    def test_compiled(self, d):
        from polarcone import _core

        self.check(_core.psd_project_cells, d, seed=3 + d)

    def test_dispatch_d3_uses_pure_path(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=(10, 3, 3))
        a = 0.5 * (a + np.swapaxes(a, -1, -2))
        out = backend.psd_project_cells(a)
        assert np.linalg.eigvalsh(out).min() >= -1e-12


class TestPureKernelBehaviour:
    # the pure kernels must satisfy the same contracts even without the
    # extension; exercised via _core_py directly
    def test_pava_blocks_not_merged_on_ties(self):
        x, block = _core_py.pava([3.0, 1.0, 2.0], [1.0, 1.0, 1.0])
        assert x.tolist() == [2.0, 2.0, 2.0]
        assert block.tolist() == [0, 0, 1]

    def test_pava_lex_right_limit(self):
        x, vbar, block = _core_py.pava_lex(
            [0.5, 0.5], [1.0, -1.0], [0.5, 0.5]
        )
        assert x.tolist() == [0.5, 0.5]
        assert vbar.tolist() == [0.0, 0.0]
        assert block.tolist() == [0, 0]

    def test_pava_lex_separating_tie_not_merged(self):
        x, vbar, block = _core_py.pava_lex(
            [0.5, 0.5], [-1.0, 1.0], [0.5, 0.5]
        )
        assert vbar.tolist() == [-1.0, 1.0]
        assert block.tolist() == [0, 1]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            _core_py.pava([1.0], [1.0, 2.0])
