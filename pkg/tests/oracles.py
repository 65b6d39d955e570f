"""Independent reference computations and instance builders for the tests.

Everything here deliberately avoids the code paths it is used to check:
the isotonic oracle enumerates block patterns, the 1d recovery oracle
integrates the partial-sum primitive, and manufactured 2d instances are
built by applying the assembly operator to a known PSD field.
"""

from itertools import product

import numpy as np

import polarcone as pc
from polarcone.deformation import pack_sym
from polarcone.recovery import _assemble


def brute_force_isotonic(y, w):
    """Exhaustive weighted isotonic regression for small n.

    Enumerates all 2^(n-1) consecutive-block patterns, solves each in closed
    form (blockwise weighted means), discards patterns with decreasing block
    values, and returns the feasible minimizer of sum w (x - y)^2.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = len(y)
    pw = np.r_[0.0, np.cumsum(w)]
    pwy = np.r_[0.0, np.cumsum(w * y)]
    best, best_obj = None, np.inf
    for mask in range(1 << (n - 1)):
        bounds = [0]
        for i in range(n - 1):
            if (mask >> i) & 1:
                bounds.append(i + 1)
        bounds.append(n)
        means = [
            (pwy[b] - pwy[a]) / (pw[b] - pw[a])
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        x = np.empty(n)
        for (a, b), m in zip(zip(bounds[:-1], bounds[1:]), means):
            x[a:b] = m
        obj = float(np.dot(w, (x - y) ** 2))
        if obj < best_obj:
            best, best_obj = x, obj
    return best


def random_sticky_state(rng, n, dyadic_weights=True):
    """Random sticky initial data; dyadic weights make mass sums exact."""
    x0 = np.sort(rng.uniform(-1.0, 1.0, n))
    v0 = rng.uniform(-2.0, 2.0, n)
    if dyadic_weights:
        w = rng.integers(1, 1025, n) / 1024.0
    else:
        w = rng.uniform(0.1, 1.0, n)
    return pc.StickyState.from_arrays(x0, v0, w)


def feasible_force_1d(grid, rng, margin=2):
    """Force atoms on cell centers whose cumulative sums stay nonnegative.

    Returns (F, cell indices, per-atom force values); the cumulative sums
    end at zero so the instance admits a compactly supported recovery.
    """
    n = grid.n[0]
    count = int(rng.integers(2, max(3, n // 2)))
    cells = np.sort(
        rng.choice(np.arange(margin, n - margin), size=count, replace=False)
    )
    profile = np.r_[rng.uniform(0.1, 1.0, count - 1), 0.0]
    f = np.diff(np.r_[0.0, profile])
    centers = grid.cell_centers().reshape(-1)
    F = pc.VectorMeasure(centers[cells][:, None], f[:, None])
    return F, cells, f


def expected_masses_1d(grid, cells, f):
    """Cell masses of the measure whose density is the running primitive.

    Uses nonneg_primitive as the cumulative-sum oracle; an atom sits at its
    cell center, so the atom cell carries the half/half trapezoid mass.
    """
    n = grid.n[0]
    h = float(grid.h[0])
    unit = pc.DiscreteMeasure(np.arange(len(f), dtype=float), np.ones(len(f)))
    P = pc.nonneg_primitive(f, unit)
    expected = np.zeros(n)
    cur, k = 0.0, 0
    for c in range(n):
        left = cur
        if k < len(cells) and cells[k] == c:
            cur = float(P[k])
            k += 1
        expected[c] = 0.5 * h * (left + cur)
    return expected


def manufactured_2d(n, seed, lo=0.0, hi=1.0):
    """A 2d problem whose data comes from a known PSD cell field.

    The field vanishes on the boundary ring of cells; forces at interior
    nodes are chosen so that every hat constraint (and the identity row)
    is satisfied by the field exactly.  Returns (problem, M_star).
    """
    rng = np.random.default_rng(seed)
    grid = pc.Grid([[lo, hi], [lo, hi]], (n, n))
    cells = np.zeros((n, n, 2, 2))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            G = rng.normal(size=(2, 2))
            cells[i, j] = (G.T @ G + 0.1 * np.eye(2)) * grid.cell_volume
    m_star = pc.MatrixMeasureField(grid, cells)

    shell = pc.RepresentationProblem.build(None, None, grid, include_identity_row=False)
    shell.inequality_checked = True
    asm = _assemble(shell, False)
    b_hat = asm.R @ pack_sym(cells, iso=True).reshape(-1)

    nodes = grid.nodes()
    pts, vecs = [], []
    k = 0
    for idx in product(range(1, n), range(1, n)):
        vecs.append([-b_hat[k], -b_hat[k + 1]])
        k += 2
        pts.append(nodes[idx])
    F = pc.VectorMeasure(np.array(pts), np.array(vecs))
    problem = pc.RepresentationProblem.build(F, None, grid)
    problem.inequality_checked = True
    return problem, m_star


def random_symmetric_field(rng, grid):
    v = rng.normal(size=tuple(grid.n) + (grid.d, grid.d))
    return 0.5 * (v + np.swapaxes(v, -1, -2))
