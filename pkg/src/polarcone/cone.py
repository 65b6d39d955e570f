"""One-dimensional cone machinery.

Projection onto the cone of nondecreasing (monotone) maps in a weighted
L2 metric, the sticky-particle evolution it generates, and certificates
that a residual lies in the polar cone of the monotone cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import pava, pava_lex

__all__ = [
    "DiscreteMeasure",
    "MonotoneMap1D",
    "PolarCertificate1D",
    "StickyState",
    "project_monotone_1d",
    "sticky_evolve",
    "lagrangian_velocity",
    "evolution_blocks",
    "push_forward",
    "polar_residual",
    "polar_membership_1d",
    "nonneg_primitive",
    "is_monotone_map",
]


def _vector(a, name="values"):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely many atoms with strictly positive weights.

    ``atoms`` is either a vector of real positions (kept nondecreasing) or an
    (n, d) array of points.  ``normalized=True`` asserts unit total mass.
    """

    atoms: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        atoms = np.ascontiguousarray(self.atoms, dtype=np.float64)
        weights = _vector(self.weights, "weights")
        if atoms.ndim not in (1, 2):
            raise ValueError("atoms must be a vector or an (n, d) array")
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("invalid measure")
        if weights.size == 0 or not np.all(weights > 0.0):
            raise ValueError("invalid measure")
        if atoms.ndim == 1 and np.any(np.diff(atoms) < 0.0):
            raise ValueError("atoms must be nondecreasing")
        if self.normalized and abs(math.fsum(weights.tolist()) - 1.0) > 1e-12:
            raise ValueError("weights of a normalized measure must sum to 1")
        object.__setattr__(self, "atoms", _freeze(atoms))
        object.__setattr__(self, "weights", _freeze(weights))

    def __len__(self):
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    @classmethod
    def uniform(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "DiscreteMeasure":
        """Atoms at midpoints of n equal cells of [lo, hi], weights (hi-lo)/n."""
        if n < 1:
            raise ValueError("invalid measure")
        edges = np.linspace(lo, hi, n + 1)
        atoms = 0.5 * (edges[:-1] + edges[1:])
        weights = np.full(n, (hi - lo) / n)
        total = math.fsum(weights.tolist())
        return cls(atoms, weights, normalized=abs(total - 1.0) <= 1e-12)


@dataclass(frozen=True, eq=False)
class MonotoneMap1D:
    """A nondecreasing vector of values, i.e. a member of the discrete cone.

    ``blocks`` carries the pooled-block index per entry when the map came out
    of a projection; it is None for maps built directly from data.
    """

    values: np.ndarray
    blocks: np.ndarray | None = None

    def __post_init__(self):
        values = _vector(self.values)
        if values.size == 0:
            raise ValueError("empty map")
        if np.any(np.diff(values) < 0.0):
            raise ValueError("values must be nondecreasing")
        object.__setattr__(self, "values", _freeze(values))
        if self.blocks is not None:
            blocks = np.ascontiguousarray(self.blocks, dtype=np.int64)
            if blocks.shape != values.shape:
                raise ValueError("length mismatch")
            object.__setattr__(self, "blocks", _freeze(blocks))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class StickyState:
    """Initial data of a sticky-particle system.

    ``X0`` monotone initial positions, ``V0`` initial velocities, ``measure``
    the particle masses (with reference atoms, e.g. midpoints of [0, 1]).
    """

    X0: MonotoneMap1D
    V0: np.ndarray
    measure: DiscreteMeasure

    def __post_init__(self):
        v0 = _vector(self.V0, "V0")
        if len(self.X0) != v0.shape[0] or len(self.measure) != v0.shape[0]:
            raise ValueError("length mismatch")
        object.__setattr__(self, "V0", _freeze(v0))

    def __len__(self):
        return len(self.X0)

    @classmethod
    def from_arrays(cls, x0, v0, weights, atoms=None) -> "StickyState":
        weights = _vector(weights, "weights")
        if atoms is None:
            measure = DiscreteMeasure(
                DiscreteMeasure.uniform(len(weights)).atoms, weights
            )
        else:
            measure = DiscreteMeasure(atoms, weights)
        return cls(MonotoneMap1D(x0), v0, measure)


@dataclass(frozen=True, eq=False)
class PolarCertificate1D:
    """Certificate that Y lies in the polar cone at X.

    Feasibility means: the weighted inner product <Y, X> vanishes (within
    tol_eq), every partial sum of Y dm is >= -tol_pos, and the final partial
    sum vanishes (within tol_eq).  By summation by parts this bounds
    sum Y_i X'_i m_i for every monotone X' with values in [-1, 1].
    """

    inner_product: float
    primitive: np.ndarray
    feasible: bool
    tol_eq: float
    tol_pos: float

    def __post_init__(self):
        object.__setattr__(self, "primitive", _freeze(_vector(self.primitive)))


def project_monotone_1d(y, w) -> MonotoneMap1D:
    """Metric projection of ``y`` onto nondecreasing vectors, weights ``w``.

    Solves min sum w_i (x_i - y_i)^2 over x_1 <= ... <= x_n by weighted
    pool-adjacent-violators.  Each output value is the weighted mean of a
    maximal pooled block, so the weighted mean of y is preserved.

    Parameters
    ----------
    y : array_like
        Input values.
    w : array_like
        Strictly positive weights.

    Returns
    -------
    MonotoneMap1D with the pooled-block index per entry in ``blocks``.
    """
    y = _vector(y, "y")
    w = _vector(w, "w")
    if y.size == 0:
        raise ValueError("empty map")
    if w.shape[0] != y.shape[0]:
        raise ValueError("length mismatch")
    if not np.all(w > 0.0):
        raise ValueError("invalid measure")
    x, block = pava(y, w)
    return MonotoneMap1D(x, block)


def sticky_evolve(state: StickyState, t: float) -> MonotoneMap1D:
    """Particle positions at time t >= 0: project X0 + t*V0 onto the cone.

    Colliding particles pool into blocks moving with the weighted mean
    velocity; mass and momentum are conserved.
    """
    if t < 0.0:
        raise ValueError("negative time")
    y = state.X0.values + t * state.V0
    return project_monotone_1d(y, state.measure.weights)


def lagrangian_velocity(state: StickyState, t: float) -> np.ndarray:
    """Velocity of each particle at time t > 0 (right-sided at collisions).

    Returns the weighted mean of V0 over each pooled block of the evolved
    configuration.  At a collision instant the blocks that are about to
    merge are already pooled (positions tie, pooled velocities still
    violate), which yields the post-collision velocity.

    The right limit at t = 0 is ill-defined when X0 carries coincident atoms
    with distinct velocities, hence t must be positive.
    """
    if t <= 0.0:
        raise ValueError(
            "time must be positive: at t=0 the right-sided velocity is "
            "ill-defined when initial atoms coincide"
        )
    y = state.X0.values + t * state.V0
    _, vbar, _ = pava_lex(y, state.V0, state.measure.weights)
    return vbar


def evolution_blocks(state: StickyState, t: float) -> np.ndarray:
    """Pooled-block index per particle at time t > 0 (right-limit at ties).

    Consistent with ``lagrangian_velocity``: blocks that tie in position and
    are still approaching count as merged.
    """
    if t <= 0.0:
        raise ValueError(
            "time must be positive: at t=0 the right-sided block structure is "
            "ill-defined when initial atoms coincide"
        )
    y = state.X0.values + t * state.V0
    _, _, blocks = pava_lex(y, state.V0, state.measure.weights)
    return blocks


def push_forward(X, m: DiscreteMeasure, quantum: float = 1e-12) -> DiscreteMeasure:
    """Image measure of ``m`` under the monotone map ``X``.

    Atoms are the distinct values of X; values equal after rounding to the
    absolute ``quantum`` merge into one atom carrying the summed mass (the
    pooled means of identical blocks must collapse to a single atom).  Total
    mass is the exact sum of the input weights.
    """
    x = X.values if isinstance(X, MonotoneMap1D) else _vector(X, "X")
    w = m.weights
    if x.shape[0] != w.shape[0]:
        raise ValueError("length mismatch")
    key = np.round(x / quantum)
    # monotone input: equal keys are consecutive
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    bounds = np.r_[starts, x.shape[0]]
    atoms = np.empty(starts.size)
    weights = np.empty(starts.size)
    for j in range(starts.size):
        i0, i1 = bounds[j], bounds[j + 1]
        ws = math.fsum(w[i0:i1].tolist())
        atoms[j] = math.fsum((w[i0:i1] * x[i0:i1]).tolist()) / ws
        weights[j] = ws
    return DiscreteMeasure(atoms, weights, normalized=m.normalized)


def polar_residual(state: StickyState, t: float) -> np.ndarray:
    """Residual (X0 + t*V0) - X(t), an element of the polar cone at X(t)."""
    if t < 0.0:
        raise ValueError("negative time")
    y = state.X0.values + t * state.V0
    return y - sticky_evolve(state, t).values


def nonneg_primitive(Y, m: DiscreteMeasure) -> np.ndarray:
    """Partial sums P_j = sum_{i<=j} Y_i m_i.

    Y_j m_j is the forward difference of the extension (0, P_1, ..., P_N);
    when Y lies in the polar cone all P_j are (numerically) nonnegative and
    the final sum vanishes.
    """
    Y = _vector(Y, "Y")
    if Y.shape[0] != len(m):
        raise ValueError("length mismatch")
    return np.cumsum(Y * m.weights)


def polar_membership_1d(
    Y,
    X,
    m: DiscreteMeasure,
    tol_eq: float | None = None,
    tol_pos: float | None = None,
) -> PolarCertificate1D:
    """Certify membership of Y in the polar cone at X over the measure m.

    Checks <Y, X>_m = 0 and nonnegativity of the partial sums of Y dm; by
    discrete summation by parts a feasible certificate bounds <Y, X'>_m for
    every monotone X' with sup-norm at most 1.

    Default tolerances scale with max(1, |Y|_inf * |X|_inf): tol_eq = 1e-9,
    tol_pos = 1e-12 times that scale.
    """
    Y = _vector(Y, "Y")
    x = X.values if isinstance(X, MonotoneMap1D) else _vector(X, "X")
    if Y.shape[0] != x.shape[0] or Y.shape[0] != len(m):
        raise ValueError("length mismatch")
    scale = max(
        1.0, float(np.abs(Y).max(initial=0.0)) * float(np.abs(x).max(initial=0.0))
    )
    if tol_eq is None:
        tol_eq = 1e-9 * scale
    if tol_pos is None:
        tol_pos = 1e-12 * scale
    ym = Y * m.weights
    inner = float(np.dot(ym, x))
    primitive = np.cumsum(ym)
    feasible = (
        abs(inner) <= tol_eq
        and float(primitive.min()) >= -tol_pos
        and abs(float(primitive[-1])) <= tol_eq
    )
    return PolarCertificate1D(inner, primitive, bool(feasible), tol_eq, tol_pos)


def is_monotone_map(points, values, tol: float | None = None) -> bool:
    """Pairwise monotonicity check of a sampled map in any dimension.

    True iff (values[i] - values[j]) . (points[i] - points[j]) >= -tol for
    all pairs.  O(n^2); fine at the scales used here.
    """
    p = np.ascontiguousarray(points, dtype=np.float64)
    v = np.ascontiguousarray(values, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if v.ndim == 1:
        v = v[:, None]
    if p.shape != v.shape:
        raise ValueError("length mismatch")
    if tol is None:
        scale = max(
            1.0, float(np.abs(p).max(initial=0.0)) * float(np.abs(v).max(initial=0.0))
        )
        tol = 1e-12 * scale
    dp = p[:, None, :] - p[None, :, :]
    dv = v[:, None, :] - v[None, :, :]
    return bool(np.min(np.einsum("ijk,ijk->ij", dv, dp)) >= -tol)
