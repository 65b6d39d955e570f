"""Grids, test deformations, and their symmetric gradients.

A deformation is stored by its values on the nodes of a rectangular grid;
its deformation tensor (the symmetric part of the Jacobian) is one symmetric
d x d matrix per cell, obtained from averaged forward differences of the
cell's corner nodes.  Matrix-valued cell fields store cell masses, not
densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .cone import is_monotone_map

__all__ = [
    "Grid",
    "TestDeformation",
    "VectorMeasure",
    "MatrixMeasureField",
    "InequalityReport",
    "deformation_tensor",
    "identity_deformation",
    "monotone_test_family",
    "evaluate_G",
    "check_inequality",
    "sym_index_pairs",
    "pack_sym",
    "unpack_sym",
    "sym_eigmin",
    "sym_eigmax",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Axis-aligned box [lo, hi] per axis, split into n cells per axis.

    extent: (d, 2) array of [lo, hi]; n: cell counts, at least 2 per axis.
    """

    extent: np.ndarray
    n: tuple

    def __post_init__(self):
        extent = np.atleast_2d(np.asarray(self.extent, dtype=np.float64))
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if extent.shape != (len(n), 2):
            raise ValueError("extent must be (d, 2) matching len(n)")
        if any(k < 2 for k in n):
            raise ValueError("need at least 2 cells per axis")
        if np.any(extent[:, 1] <= extent[:, 0]):
            raise ValueError("extent must have hi > lo")
        extent.setflags(write=False)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "n", n)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def lo(self) -> np.ndarray:
        return self.extent[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self.extent[:, 1]

    @property
    def h(self) -> np.ndarray:
        return (self.extent[:, 1] - self.extent[:, 0]) / np.asarray(self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def ncells(self) -> int:
        return int(np.prod(self.n))

    def node_axis(self, axis: int) -> np.ndarray:
        lo, hi = self.extent[axis]
        return np.linspace(lo, hi, self.n[axis] + 1)

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (n1+1, ..., nd+1, d)."""
        axes = [self.node_axis(a) for a in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        """Cell-center coordinates, shape (n1, ..., nd, d)."""
        axes = [
            0.5 * (self.node_axis(a)[:-1] + self.node_axis(a)[1:])
            for a in range(self.d)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _edge_average(arr, axis):
    sl0 = [slice(None)] * arr.ndim
    sl1 = [slice(None)] * arr.ndim
    sl0[axis] = slice(0, -1)
    sl1[axis] = slice(1, None)
    return 0.5 * (arr[tuple(sl0)] + arr[tuple(sl1)])


def deformation_tensor(u_nodes, grid: Grid) -> np.ndarray:
    """Per-cell symmetric gradient of a nodal vector field.

    The derivative along each axis is the forward difference averaged over
    the cell's edges in that direction (the gradient of the multilinear
    interpolant at the cell center).  Output shape (*grid.n, d, d), exactly
    symmetric.
    """
    u = np.asarray(u_nodes, dtype=np.float64)
    expected = tuple(k + 1 for k in grid.n) + (grid.d,)
    if u.shape != expected:
        raise ValueError("grid/node mismatch")
    h = grid.h
    cols = []
    for axis in range(grid.d):
        g = np.diff(u, axis=axis) / h[axis]
        for other in range(grid.d):
            if other != axis:
                g = _edge_average(g, other)
        cols.append(g)
    du = np.stack(cols, axis=-1)  # du[..., a, b] = d u_a / d x_b
    return 0.5 * (du + np.swapaxes(du, -1, -2))


def _interpolate(u_nodes, grid: Grid, points) -> np.ndarray:
    """Multilinear interpolation of nodal values at points inside the grid."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != grid.d:
        raise ValueError("points must have grid dimension")
    rel = (pts - grid.lo) / grid.h
    nn = np.asarray(grid.n)
    if np.any(rel < -1e-9) or np.any(rel > nn + 1e-9):
        raise ValueError("support exceeds grid")
    idx = np.clip(np.floor(rel).astype(np.intp), 0, nn - 1)
    loc = np.clip(rel - idx, 0.0, 1.0)
    out = np.zeros((pts.shape[0], u_nodes.shape[-1]))
    for corner in product((0, 1), repeat=grid.d):
        wgt = np.ones(pts.shape[0])
        for a, c in enumerate(corner):
            wgt = wgt * (loc[:, a] if c else 1.0 - loc[:, a])
        nodes = tuple(idx[:, a] + corner[a] for a in range(grid.d))
        out += wgt[:, None] * u_nodes[nodes]
    return out


@dataclass(frozen=True, eq=False)
class TestDeformation:
    """A deformation sampled on grid nodes, with its per-cell tensor."""

    name: str
    grid: Grid
    u_nodes: np.ndarray
    e_cells: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u_nodes, dtype=np.float64)
        e = self.e_cells
        if e is None:
            e = deformation_tensor(u, self.grid)
        u.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "u_nodes", u)
        object.__setattr__(self, "e_cells", e)

    @classmethod
    def from_map(cls, grid: Grid, fn, name: str) -> "TestDeformation":
        """Sample a callable (m, d) -> (m, d) on the grid nodes."""
        nodes = grid.nodes()
        flat = nodes.reshape(-1, grid.d)
        vals = np.asarray(fn(flat), dtype=np.float64).reshape(nodes.shape)
        return cls(name, grid, vals)

    def at(self, points) -> np.ndarray:
        """Multilinear interpolation of the deformation at points."""
        return _interpolate(self.u_nodes, self.grid, points)

    def is_monotone_on_nodes(self, tol=None) -> bool:
        flat = self.grid.nodes().reshape(-1, self.grid.d)
        return is_monotone_map(flat, self.u_nodes.reshape(-1, self.grid.d), tol=tol)


def identity_deformation(grid: Grid) -> TestDeformation:
    return TestDeformation.from_map(grid, lambda x: x, "identity")


@dataclass(frozen=True, eq=False)
class VectorMeasure:
    """Finitely many atoms carrying vectors (force role)."""

    atoms: np.ndarray
    vectors: np.ndarray
    first_moment: float = field(default=None, compare=False)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if atoms.shape != vectors.shape:
            raise ValueError("length mismatch")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(vectors))):
            raise ValueError("measure must have finite first moment")
        atoms.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "vectors", vectors)
        moment = float(
            np.sum(
                np.linalg.norm(atoms, axis=1) * np.linalg.norm(vectors, axis=1)
            )
        )
        object.__setattr__(self, "first_moment", moment)

    def __len__(self):
        return self.atoms.shape[0]

    @classmethod
    def empty(cls, d: int) -> "VectorMeasure":
        return cls(np.zeros((0, d)), np.zeros((0, d)))


def sym_index_pairs(d: int):
    """Upper-triangle (i, j) pairs in row-major order."""
    return [(i, j) for i in range(d) for j in range(i, d)]


def pack_sym(mats, iso: bool = False) -> np.ndarray:
    """Pack (..., d, d) symmetric matrices into (..., d(d+1)/2) vectors.

    With ``iso=True`` off-diagonals are scaled by sqrt(2) so the euclidean
    norm of the packed vector equals the Frobenius norm of the matrix.
    """
    mats = np.asarray(mats, dtype=np.float64)
    d = mats.shape[-1]
    cols = []
    for i, j in sym_index_pairs(d):
        c = mats[..., i, j]
        if iso and i != j:
            c = c * math.sqrt(2.0)
        cols.append(c)
    return np.stack(cols, axis=-1)


def unpack_sym(arr, d: int, iso: bool = False) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    out = np.zeros(arr.shape[:-1] + (d, d))
    for k, (i, j) in enumerate(sym_index_pairs(d)):
        c = arr[..., k]
        if iso and i != j:
            c = c / math.sqrt(2.0)
        out[..., i, j] = c
        out[..., j, i] = c
    return out


def _sym_eigvals(mats) -> np.ndarray:
    mats = np.asarray(mats, dtype=np.float64)
    d = mats.shape[-1]
    if d == 1:
        return mats[..., 0, 0][..., None]
    if d == 2:
        a = mats[..., 0, 0]
        c = mats[..., 1, 1]
        b = 0.5 * (mats[..., 0, 1] + mats[..., 1, 0])
        mean = 0.5 * (a + c)
        r = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
        return np.stack([mean - r, mean + r], axis=-1)
    return np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2)))


def sym_eigmin(mats) -> np.ndarray:
    return _sym_eigvals(mats)[..., 0]


def sym_eigmax(mats) -> np.ndarray:
    return _sym_eigvals(mats)[..., -1]


@dataclass(frozen=True, eq=False)
class MatrixMeasureField:
    """Per-cell symmetric d x d matrices holding cell masses."""

    grid: Grid
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        expected = tuple(self.grid.n) + (self.grid.d, self.grid.d)
        if cells.shape != expected:
            raise ValueError("cells must have shape (*grid.n, d, d)")
        asym = np.abs(cells - np.swapaxes(cells, -1, -2)).max(initial=0.0)
        if asym > 1e-9 * (1.0 + np.abs(cells).max(initial=0.0)):
            raise ValueError("cells must be symmetric")
        cells = 0.5 * (cells + np.swapaxes(cells, -1, -2))
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def zeros(cls, grid: Grid) -> "MatrixMeasureField":
        return cls(grid, np.zeros(tuple(grid.n) + (grid.d, grid.d)))

    @classmethod
    def from_packed(cls, grid: Grid, packed) -> "MatrixMeasureField":
        arr = np.asarray(packed, dtype=np.float64).reshape(
            grid.ncells, -1
        )
        cells = unpack_sym(arr, grid.d).reshape(
            tuple(grid.n) + (grid.d, grid.d)
        )
        return cls(grid, cells)

    def packed(self) -> np.ndarray:
        """(ncells, d(d+1)/2) plain packing, cells in C order."""
        return pack_sym(self.cells).reshape(self.grid.ncells, -1)

    @property
    def total_trace(self) -> float:
        return float(np.einsum("...ii->...", self.cells).sum())

    @property
    def min_eigenvalue(self) -> float:
        return float(sym_eigmin(self.cells).min())

    def is_psd(self, tol: float = 0.0) -> bool:
        return self.min_eigenvalue >= -tol


def monotone_test_family(grid: Grid, count: int, seed: int):
    """Deterministic family of monotone test deformations.

    Contains the identity, the canonical symmetric rank-one maps, one
    translation, then seeded random rank-one maps, random positive-definite
    linear maps (PSD + antisymmetric part), and gradients of smooth convex
    bumps with bounded slope.  Every member is monotone on the grid nodes by
    construction.
    """
    d = grid.d
    if count < d * (d + 1) // 2 + 1:
        raise ValueError("count too small")
    rng = np.random.default_rng(seed)
    span = float(np.max(grid.hi - grid.lo))
    members = [identity_deformation(grid)]

    def rank_one(v, name):
        v = np.asarray(v, dtype=np.float64)
        return TestDeformation.from_map(
            grid, lambda x, v=v: (x @ v)[:, None] * v[None, :], name
        )

    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        members.append(rank_one(e, f"rank-one[e{k}]"))
    shift = rng.uniform(-1.0, 1.0, size=d)
    members.append(
        TestDeformation.from_map(
            grid, lambda x, s=shift: np.broadcast_to(s, x.shape).copy(), "translation"
        )
    )

    i = 0
    while len(members) < count:
        kind = i % 3
        if kind == 0:
            v = rng.normal(size=d)
            v /= np.linalg.norm(v)
            members.append(rank_one(v, f"rank-one[{i}]"))
        elif kind == 1:
            g = rng.normal(size=(d, d))
            s = g.T @ g / d
            c = rng.normal(size=(d, d))
            b = 0.5 * (c - c.T)
            a = s + b
            members.append(
                TestDeformation.from_map(
                    grid, lambda x, a=a: x @ a.T, f"linear[{i}]"
                )
            )
        else:
            center = rng.uniform(grid.lo, grid.hi)
            sigma = span * rng.uniform(0.2, 0.6)
            eps = rng.uniform(0.2, 1.0)

            def bump(x, c=center, s=sigma, e=eps):
                diff = x - c
                r2 = np.sum(diff * diff, axis=1)
                return e * diff / np.sqrt(1.0 + r2 / (s * s))[:, None]

            members.append(TestDeformation.from_map(grid, bump, f"bump[{i}]"))
        i += 1
    return members[:count]


def evaluate_G(F, H, u: TestDeformation) -> float:
    """Value of the force/deformation pairing on a test deformation.

    Returns -sum_atoms u(x_i) . f_i - sum_cells <e(u), H_cell>, with the
    deformation evaluated at atoms by multilinear interpolation.  F and H
    may be None (treated as zero).
    """
    total = 0.0
    if F is not None and len(F) > 0:
        ua = u.at(F.atoms)
        total -= float(np.einsum("ij,ij->", ua, F.vectors))
    if H is not None:
        total -= float(np.vdot(u.e_cells, H.cells))
    return total


@dataclass(frozen=True, eq=False)
class InequalityReport:
    """Sampled positivity check of the pairing on a monotone family.

    Passing is necessary for the positivity hypothesis, not sufficient: only
    the sampled members are tested.
    """

    g_values: np.ndarray
    min_G: float
    violating_members: tuple
    tol_G: float

    @property
    def passed(self) -> bool:
        return self.min_G >= -self.tol_G


def check_inequality(F, H, family) -> InequalityReport:
    """Evaluate the pairing on every family member and flag violations."""
    if not family:
        raise ValueError("family must be nonempty")
    values = np.array([evaluate_G(F, H, u) for u in family])
    if family[0].name == "identity":
        g_id = float(values[0])
    else:
        g_id = evaluate_G(F, H, identity_deformation(family[0].grid))
    tol = 1e-9 * (1.0 + abs(g_id))
    violating = tuple(int(k) for k in np.flatnonzero(values < -tol))
    return InequalityReport(values, float(values.min()), violating, tol)
