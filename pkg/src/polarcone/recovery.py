"""Recovery of a PSD matrix-valued cell field representing a force functional.

Given atoms carrying forces F and a PSD cell field H with
``G(u) = -sum u(x_i).f_i - sum <e(u), H>`` nonnegative on monotone test
deformations, find a PSD cell field M with ``G(u) = sum <e(u), M>`` for all
compactly supported test deformations, with total trace controlled by G(id).

The solver is first-order and dependency-light: exact projection onto the
affine constraint set (cached factorization of the constraint Gram matrix)
alternating with per-cell PSD projections, both relaxed, plus an annealed
trace penalty that selects a small-trace feasible point.  The support gauge
``riedl_gauge`` solves the dual conic program over deformation coefficients
and upper-bounds the pairing of any feasible field with a given direction.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized

from .backend import psd_project_cells
from .cone import DiscreteMeasure, is_monotone_map
from .deformation import (
    Grid,
    MatrixMeasureField,
    TestDeformation,
    VectorMeasure,
    _interpolate,
    deformation_tensor,
    evaluate_G,
    identity_deformation,
    pack_sym,
    sym_eigmax,
    sym_eigmin,
    sym_index_pairs,
    unpack_sym,
)

__all__ = [
    "InfeasibleError",
    "RepresentationProblem",
    "RecoveryResult",
    "SolverOptions",
    "VerificationReport",
    "hat_basis",
    "assemble_constraints",
    "recover_stress",
    "verify_representation",
    "riedl_gauge",
    "instance_from_flow",
]


class InfeasibleError(RuntimeError):
    """The constraint set and the PSD cone appear to have empty intersection."""


def hat_basis(grid: Grid):
    """One multilinear hat deformation per interior node and component.

    Hats vanish on the grid boundary, so they are the discrete stand-in for
    compactly supported test deformations.
    """
    shape = tuple(k + 1 for k in grid.n) + (grid.d,)
    basis = []
    for idx in product(*[range(1, k) for k in grid.n]):
        for comp in range(grid.d):
            u = np.zeros(shape)
            u[idx + (comp,)] = 1.0
            name = "hat[" + ",".join(map(str, idx)) + f";{comp}]"
            basis.append(TestDeformation(name, grid, u))
    return basis


def _boundary_max(u_nodes):
    m = 0.0
    for axis in range(u_nodes.ndim - 1):
        sl = [slice(None)] * u_nodes.ndim
        sl[axis] = 0
        m = max(m, float(np.abs(u_nodes[tuple(sl)]).max(initial=0.0)))
        sl[axis] = -1
        m = max(m, float(np.abs(u_nodes[tuple(sl)]).max(initial=0.0)))
    return m


@dataclass
class RepresentationProblem:
    """Data, grid, and test basis of one recovery problem.

    ``include_identity_row`` appends the trace row sum tr(M_cell) = G(id),
    turning the trace control into an equality.  ``inequality_checked``
    records whether the positivity hypothesis was sampled on a monotone
    family; assembly warns when it was not.
    """

    F: VectorMeasure | None
    H: MatrixMeasureField | None
    grid: Grid
    basis: list
    include_identity_row: bool = True
    inequality_checked: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        for u in self.basis:
            if _boundary_max(u.u_nodes) != 0.0:
                raise ValueError("basis members must vanish on the grid boundary")

    @classmethod
    def build(
        cls, F, H, grid: Grid, include_identity_row: bool = True
    ) -> "RepresentationProblem":
        return cls(F, H, grid, hat_basis(grid), include_identity_row)


@dataclass(frozen=True, eq=False)
class _Assembly:
    R: sp.csr_matrix  # rows: isometrically packed deformation tensors
    b: np.ndarray
    solve_gram: object
    id_index: int | None
    g_id: float
    d: int
    s: int
    ncells: int


def _identity_row(grid: Grid) -> np.ndarray:
    s = grid.d * (grid.d + 1) // 2
    row = np.zeros((grid.ncells, s))
    for k, (i, j) in enumerate(sym_index_pairs(grid.d)):
        if i == j:
            row[:, k] = 1.0
    return row.ravel()


def _assemble(problem: RepresentationProblem, with_identity: bool) -> _Assembly:
    key = bool(with_identity)
    if key in problem._cache:
        return problem._cache[key]
    if not problem.basis:
        raise ValueError("empty basis")
    if not problem.inequality_checked:
        warnings.warn(
            "positivity of the data was not checked on a monotone family",
            stacklevel=3,
        )
    grid = problem.grid
    d, s, ncells = grid.d, grid.d * (grid.d + 1) // 2, grid.ncells
    rows = [
        pack_sym(u.e_cells, iso=True).reshape(ncells * s) for u in problem.basis
    ]
    b = [evaluate_G(problem.F, problem.H, u) for u in problem.basis]
    g_id = evaluate_G(problem.F, problem.H, identity_deformation(grid))
    id_index = None
    if with_identity:
        id_index = len(rows)
        rows.append(_identity_row(grid))
        b.append(g_id)
    R = sp.csr_matrix(np.stack(rows))
    gram = (R @ R.T).tocsc()
    asm = _Assembly(R, np.asarray(b), factorized(gram), id_index, g_id, d, s, ncells)
    problem._cache[key] = asm
    return asm


def assemble_constraints(problem: RepresentationProblem):
    """Sparse constraint matrix and right-hand side, plainly packed unknowns.

    Row k encodes sum_cells <e(u_k), M_cell> = G(u_k) over the unknown
    vector (per cell: diagonal entries, then off-diagonals carrying the
    Frobenius weight 2).  The identity row, when enabled, is appended last.
    """
    asm = _assemble(problem, problem.include_identity_row)
    scale = np.ones(asm.s)
    for k, (i, j) in enumerate(sym_index_pairs(asm.d)):
        if i != j:
            scale[k] = math.sqrt(2.0)  # iso coefficient -> plain weight-2
    A = asm.R @ sp.diags(np.tile(scale, asm.ncells))
    return A.tocsr(), asm.b.copy()


@dataclass
class SolverOptions:
    """Knobs of the alternating-projection solver and the gauge ADMM."""

    tol: float | None = None  # default 1e-8 * (1 + |b|_inf)
    max_iter: int = 50000
    relax: float = 1.8
    penalty_start: float = 1e-2
    penalty_end: float = 1e-6
    anneal_iters: int | None = None  # default min(1000, max_iter // 4)
    check_every: int = 10
    stall_checks: int = 200
    stall_ratio: float = 1e3
    fast: bool = False
    admm_rho: float = 1.0
    admm_alpha: float = 1.6
    admm_max_iter: int = 20000
    admm_tol: float = 1e-12


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """Outcome of a recovery run.

    ``converged`` requires the representation residual, per-cell PSD defect,
    and the trace budget to hold at the solver tolerance.
    """

    M: MatrixMeasureField
    residual_inf: float
    min_eigenvalue: float
    total_trace: float
    trace_budget: float
    iterations: int
    converged: bool


def _diag_mask(d: int, ncells: int) -> np.ndarray:
    base = np.array([i == j for (i, j) in sym_index_pairs(d)])
    return np.tile(base, ncells)


def _psd_step(m, d, ncells):
    mats = unpack_sym(m.reshape(ncells, -1), d, iso=True)
    return pack_sym(psd_project_cells(mats), iso=True).reshape(m.shape)


def recover_stress(
    problem: RepresentationProblem, opts: SolverOptions | None = None
) -> RecoveryResult:
    """Find a PSD cell field M with <e(u_k), M> = G(u_k) and small trace.

    Relaxed alternating projections between the affine constraint set and
    the per-cell PSD cone, preceded by an annealed trace-penalty phase; the
    returned field is the PSD projection of an affine-projected iterate, so
    it is PSD to machine precision and the reported residual measures the
    constraint defect only.

    Raises InfeasibleError when the residual stalls well above tolerance
    (the positivity hypothesis fails or the grid is too coarse); returns
    ``converged=False`` with the best iterate when max_iter runs out.
    """
    opts = opts or SolverOptions()
    asm = _assemble(problem, problem.include_identity_row)
    R, b = asm.R, asm.b
    bmax = float(np.abs(b).max(initial=0.0))
    tol = opts.tol if opts.tol is not None else 1e-8 * (1.0 + bmax)
    anneal = (
        opts.anneal_iters
        if opts.anneal_iters is not None
        else min(1000, opts.max_iter // 4)
    )

    def affine(m):
        return m - R.T @ asm.solve_gram(R @ m - b)

    m_ls = R.T @ asm.solve_gram(b)
    ls_resid = float(np.abs(R @ m_ls - b).max(initial=0.0))
    if ls_resid > max(1e-6 * (1.0 + bmax), 10.0 * tol):
        raise InfeasibleError(
            f"infeasible: constraint system inconsistent, least-squares "
            f"residual {ls_resid:.3e}"
        )

    diag = _diag_mask(asm.d, asm.ncells)
    pen_scale = 1.0 + float(np.abs(m_ls).max(initial=0.0))
    mu0 = opts.penalty_start * pen_scale
    mu1 = opts.penalty_end * pen_scale
    decay = (mu1 / mu0) ** (1.0 / max(anneal, 1))

    z = m_ls.copy()
    best_res = math.inf
    best = None
    prev_cand = None
    history = deque(maxlen=opts.stall_checks)
    iterations = opts.max_iter
    converged = False

    for it in range(opts.max_iter):
        if it < anneal:
            mu = mu0 * decay**it
            zin = z.copy()
            zin[diag] -= mu
        else:
            mu = 0.0
            zin = z
        pa = affine(zin)
        z = z + opts.relax * (pa - z)
        pp = _psd_step(z, asm.d, asm.ncells)
        z = z + opts.relax * (pp - z)

        if (it + 1) % opts.check_every == 0 or it + 1 == opts.max_iter:
            cand = _psd_step(affine(z), asm.d, asm.ncells)
            res = float(np.abs(R @ cand - b).max(initial=0.0))
            if res < best_res:
                best_res = res
                best = cand
            if mu == 0.0:
                change = (
                    math.inf
                    if prev_cand is None
                    else float(np.abs(cand - prev_cand).max(initial=0.0))
                )
                if res <= tol and change <= tol:
                    iterations = it + 1
                    converged = True
                    best_res, best = res, cand
                    break
                if (
                    len(history) == opts.stall_checks
                    and best_res > opts.stall_ratio * tol
                    and history[0] - best_res < 1e-3 * history[0]
                ):
                    raise InfeasibleError(
                        f"infeasible: constraint residual stalled at "
                        f"{best_res:.3e} (tolerance {tol:.3e})"
                    )
                history.append(best_res)
            prev_cand = cand

    mats = unpack_sym(best.reshape(asm.ncells, -1), asm.d, iso=True)
    cells = mats.reshape(tuple(problem.grid.n) + (asm.d, asm.d))
    M = MatrixMeasureField(problem.grid, cells)
    min_eig = M.min_eigenvalue
    total_trace = M.total_trace
    norm = float(np.linalg.norm(best))
    ok = (
        best_res <= tol
        and min_eig >= -1e-9 * (1.0 + norm)
        and total_trace <= asm.g_id + max(tol, 1e-9 * (1.0 + abs(asm.g_id)))
    )
    return RecoveryResult(
        M=M,
        residual_inf=best_res,
        min_eigenvalue=min_eig,
        total_trace=total_trace,
        trace_budget=asm.g_id,
        iterations=iterations,
        converged=bool(converged and ok),
    )


@dataclass(frozen=True, eq=False)
class VerificationReport:
    """Independent re-check of a recovered field.

    The representation residual is measured on a fresh random family of
    compactly supported deformations (sparse combinations of at most ten
    hats with coefficients in [-1, 1]), never on the assembly basis.
    """

    residual_fresh_inf: float
    residual_assembly_inf: float
    min_eigenvalue: float
    total_trace: float
    trace_budget: float
    representation_ok: bool
    psd_ok: bool
    trace_ok: bool

    @property
    def passed(self) -> bool:
        return self.representation_ok and self.psd_ok and self.trace_ok


def verify_representation(
    M: MatrixMeasureField,
    problem: RepresentationProblem,
    count: int = 32,
    seed: int = 0,
) -> VerificationReport:
    """Re-check representation, PSD membership, and the trace budget."""
    asm = _assemble(problem, problem.include_identity_row)
    m_iso = pack_sym(M.cells, iso=True).reshape(-1)
    r_asm = float(np.abs(asm.R @ m_iso - asm.b).max(initial=0.0))
    tol = 1e-8 * (1.0 + float(np.abs(asm.b).max(initial=0.0)))

    rng = np.random.default_rng(seed)
    grid = problem.grid
    shape = tuple(k + 1 for k in grid.n) + (grid.d,)
    interior = list(product(*[range(1, k) for k in grid.n]))
    r_fresh = 0.0
    for _ in range(count):
        u = np.zeros(shape)
        picks = rng.integers(0, len(interior), size=rng.integers(1, 11))
        for p in picks:
            comp = int(rng.integers(0, grid.d))
            u[interior[p] + (comp,)] += float(rng.uniform(-1.0, 1.0))
        # |sum of hat coefficients| <= 10, so the fresh residual inherits
        # at most a factor 10 from the assembly residual
        td = TestDeformation("fresh", grid, u)
        g = evaluate_G(problem.F, problem.H, td)
        pair = float(np.vdot(td.e_cells, M.cells))
        r_fresh = max(r_fresh, abs(g - pair))

    min_eig = M.min_eigenvalue
    total = M.total_trace
    budget = asm.g_id
    norm = float(np.linalg.norm(M.cells))
    return VerificationReport(
        residual_fresh_inf=r_fresh,
        residual_assembly_inf=r_asm,
        min_eigenvalue=min_eig,
        total_trace=total,
        trace_budget=budget,
        representation_ok=r_fresh <= 10.0 * (r_asm + tol),
        psd_ok=min_eig >= -1e-9 * (1.0 + norm),
        trace_ok=total <= budget + 1e-6 * (1.0 + abs(budget)),
    )


def _as_cell_matrices(v, grid: Grid) -> np.ndarray:
    if isinstance(v, MatrixMeasureField):
        arr = v.cells
    else:
        arr = np.asarray(v, dtype=np.float64)
    arr = arr.reshape(grid.ncells, grid.d, grid.d)
    return 0.5 * (arr + np.swapaxes(arr, -1, -2))


def _gauge_rows(problem: RepresentationProblem, L_basis):
    """Rows, values, and an identity-reproducing coefficient vector."""
    if L_basis is None:
        asm = _assemble(problem, True)
        c_id = np.zeros(asm.R.shape[0])
        c_id[asm.id_index] = 1.0
        return asm.R, asm.b, asm.solve_gram, c_id, asm.g_id
    grid = problem.grid
    ncols = grid.ncells * grid.d * (grid.d + 1) // 2
    rows = np.stack(
        [pack_sym(u.e_cells, iso=True).reshape(ncols) for u in L_basis]
    )
    g = np.array([evaluate_G(problem.F, problem.H, u) for u in L_basis])
    R = sp.csr_matrix(rows)
    solve = factorized((R @ R.T).tocsc())
    ident = _identity_row(grid)
    c_id = solve(R @ ident)
    resid = float(np.linalg.norm(R.T @ c_id - ident))
    if resid > 1e-8 * math.sqrt(grid.ncells * grid.d):
        raise ValueError("basis must span the identity deformation tensor")
    g_id = float(g @ c_id)
    return R, g, solve, c_id, g_id


def riedl_gauge(
    problem: RepresentationProblem,
    v,
    L_basis=None,
    fast: bool = False,
    opts: SolverOptions | None = None,
) -> float:
    """Support gauge p(v): cheapest basis combination dominating ``v``.

    Minimizes G over tensors y in the basis span with y - v PSD in every
    cell.  The value upper-bounds sum <v_cell, M_cell> for every feasible
    recovered field M (the dual program), is positively homogeneous, and is
    subadditive up to solver accuracy.

    ``fast=True`` restricts y to multiples of the identity tensor: the value
    is then max_cell lambda_max(v_cell) times G(id), a cheap upper bound of
    the gauge with the same dominance property.

    The returned value comes from an exactly feasible combination (any
    residual violation is absorbed by a shift along the identity), so
    dominance is not at the mercy of solver tolerances.
    """
    opts = opts or SolverOptions()
    grid = problem.grid
    vm = _as_cell_matrices(v, grid)
    R, g, solve_gram, c_id, g_id = _gauge_rows(problem, L_basis)

    if fast or opts.fast:
        if g_id < -1e-12 * (1.0 + float(np.abs(g).max(initial=0.0))):
            raise RuntimeError(
                "unbounded below: the pairing is negative on the identity"
            )
        lam = float(sym_eigmax(vm).max())
        return lam * g_id

    s_v = float(np.abs(vm).max(initial=0.0))
    if s_v == 0.0:
        s_v = 1.0
    s_g = float(np.abs(g).max(initial=0.0))
    if s_g == 0.0:
        s_g = 1.0
    vn = pack_sym(vm / s_v, iso=True).reshape(-1)
    gn = g / s_g
    rho, alpha = opts.admm_rho, opts.admm_alpha
    d, ncells = grid.d, grid.ncells

    lam0 = max(0.0, float(sym_eigmax(vm).max()) / s_v) + 1.0
    c = lam0 * c_id
    z = R.T @ c - vn
    u = np.zeros_like(z)
    guard = 1e8 * (1.0 + float(np.abs(gn).max(initial=0.0)))
    for _ in range(opts.admm_max_iter):
        c = solve_gram(R @ (z + vn - u) - gn / rho)
        svec = R.T @ c - vn
        s_rel = alpha * svec + (1.0 - alpha) * z
        z_new = _psd_step(s_rel + u, d, ncells)
        u = u + s_rel - z_new
        prim = float(np.abs(svec - z_new).max(initial=0.0))
        dual = rho * float(np.abs(R @ (z_new - z)).max(initial=0.0))
        z = z_new
        if float(gn @ c) < -guard:
            raise RuntimeError(
                "unbounded below: positivity fails on the basis span"
            )
        if prim <= opts.admm_tol and dual <= opts.admm_tol:
            break

    # absorb any residual infeasibility into the identity direction
    gap = unpack_sym((vn - (R.T @ c)).reshape(ncells, -1), d, iso=True)
    delta = float(sym_eigmax(gap).max())
    if delta > 0.0:
        c = c + delta * c_id
    return s_v * s_g * float(gn @ c)


def _cofactor(mats: np.ndarray, det: np.ndarray) -> np.ndarray:
    d = mats.shape[-1]
    if d == 1:
        return np.ones_like(mats)
    inv = np.linalg.inv(mats)
    return det[..., None, None] * np.swapaxes(inv, -1, -2)


def instance_from_flow(
    f_nodes,
    h_nodes,
    e_weights,
    gamma: float,
    rho: DiscreteMeasure,
    grid: Grid,
    det_floor: float = 1e-10,
):
    """Build (F, H) from a monotone deformation f, a target field h, and
    internal-energy cell weights.

    g = h - f at the atoms of ``rho`` gives the force atoms F = g * rho;
    H_cell = (gamma-1) * e_cell * det(Df_sym)^(-gamma) * cof(Df_sym)^T times
    the cell volume.  H is PSD because Df_sym is symmetric positive definite
    wherever det exceeds the floor.
    """
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    f = np.asarray(f_nodes, dtype=np.float64)
    h = np.asarray(h_nodes, dtype=np.float64)
    expected = tuple(k + 1 for k in grid.n) + (grid.d,)
    if f.shape != expected or h.shape != expected:
        raise ValueError("grid/node mismatch")
    nodes = grid.nodes().reshape(-1, grid.d)
    if not is_monotone_map(nodes, f.reshape(-1, grid.d)):
        raise ValueError("deformation is not monotone on grid nodes")
    e_w = np.asarray(e_weights, dtype=np.float64)
    if e_w.shape != tuple(grid.n):
        raise ValueError("e_weights must have one value per cell")
    if np.any(e_w < 0.0):
        raise ValueError("e_weights must be nonnegative")

    dsym = deformation_tensor(f, grid)
    det = np.linalg.det(dsym) if grid.d > 1 else dsym[..., 0, 0]
    if np.any(det <= det_floor):
        raise ValueError("degenerate deformation")
    cof = _cofactor(dsym, det)
    hcells = (
        (gamma - 1.0)
        * e_w[..., None, None]
        * (det ** (-gamma))[..., None, None]
        * np.swapaxes(cof, -1, -2)
        * grid.cell_volume
    )
    H = MatrixMeasureField(grid, hcells)

    atoms = np.atleast_2d(np.asarray(rho.atoms, dtype=np.float64))
    if atoms.shape[0] == 1 and len(rho) > 1:
        atoms = atoms.T
    g_at = _interpolate(h - f, grid, atoms)
    F = VectorMeasure(atoms, g_at * rho.weights[:, None])
    return F, H
