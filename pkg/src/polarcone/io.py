"""JSON/CSV serialization of states, problems, and results.

File formats
------------
sticky state   {"atoms": [...], "weights": [...], "X0": [...], "V0": [...]}
problem        {"grid": {"d": 2, "extent": [[lo, hi], ...], "n": [...]},
                "F": {"atoms": [[x, y], ...], "vectors": [[fx, fy], ...]},
                "H": {"cells": [[h11, h12, h22], ...]}, "gamma": ...}
result         RecoveryResult scalar fields plus the name of the CSV dump
trajectory CSV t,index,X,V,block_id
field CSV      cell,m (d=1) / cell_i,cell_j,m11,m12,m22 (d=2) / analogous d=3

Floats are written with ``repr`` (shortest round-trip), so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .cone import DiscreteMeasure, MonotoneMap1D, PolarCertificate1D, StickyState
from .deformation import Grid, MatrixMeasureField, VectorMeasure
from .recovery import RecoveryResult

__all__ = [
    "load_sticky_state",
    "save_sticky_state",
    "load_problem",
    "save_problem",
    "save_result",
    "load_result",
    "save_field_csv",
    "load_field_csv",
    "save_certificate",
    "write_trajectory_csv",
]


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def load_sticky_state(path) -> StickyState:
    data = _load(path)
    return StickyState(
        MonotoneMap1D(np.asarray(data["X0"], dtype=np.float64)),
        np.asarray(data["V0"], dtype=np.float64),
        DiscreteMeasure(
            np.asarray(data["atoms"], dtype=np.float64),
            np.asarray(data["weights"], dtype=np.float64),
        ),
    )


def save_sticky_state(state: StickyState, path) -> None:
    _dump(
        {
            "atoms": state.measure.atoms.tolist(),
            "weights": state.measure.weights.tolist(),
            "X0": state.X0.values.tolist(),
            "V0": state.V0.tolist(),
        },
        path,
    )


def grid_to_dict(grid: Grid) -> dict:
    return {"d": grid.d, "extent": grid.extent.tolist(), "n": list(grid.n)}


def grid_from_dict(data: dict) -> Grid:
    return Grid(np.asarray(data["extent"], dtype=np.float64), tuple(data["n"]))


def load_problem(path):
    """Read grid, F, H, gamma from a problem file; F/H may be absent."""
    data = _load(path)
    grid = grid_from_dict(data["grid"])
    F = None
    if data.get("F") is not None:
        F = VectorMeasure(
            np.asarray(data["F"]["atoms"], dtype=np.float64).reshape(-1, grid.d),
            np.asarray(data["F"]["vectors"], dtype=np.float64).reshape(-1, grid.d),
        )
    H = None
    if data.get("H") is not None:
        H = MatrixMeasureField.from_packed(
            grid, np.asarray(data["H"]["cells"], dtype=np.float64)
        )
    return grid, F, H, data.get("gamma")


def save_problem(grid: Grid, F, H, path, gamma=None) -> None:
    data = {"grid": grid_to_dict(grid), "F": None, "H": None}
    if F is not None:
        data["F"] = {"atoms": F.atoms.tolist(), "vectors": F.vectors.tolist()}
    if H is not None:
        data["H"] = {"cells": H.packed().tolist()}
    if gamma is not None:
        data["gamma"] = gamma
    _dump(data, path)


def _field_header(d: int) -> str:
    if d == 1:
        return "cell,m"
    idx = ",".join(f"cell_{ax}" for ax in ("i", "j", "k")[:d])
    comps = ",".join(
        f"m{i + 1}{j + 1}" for i in range(d) for j in range(i, d)
    )
    return f"{idx},{comps}"


def save_field_csv(M: MatrixMeasureField, path) -> None:
    grid = M.grid
    packed = M.packed()
    with open(path, "w") as fh:
        fh.write(_field_header(grid.d) + "\n")
        for flat, row in enumerate(packed):
            idx = np.unravel_index(flat, grid.n)
            cells = ",".join(str(int(i)) for i in idx)
            vals = ",".join(repr(float(x)) for x in row)
            fh.write(f"{cells},{vals}\n")


def load_field_csv(path, grid: Grid) -> MatrixMeasureField:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    s = grid.d * (grid.d + 1) // 2
    packed = np.zeros((grid.ncells, s))
    for row in raw:
        idx = tuple(int(v) for v in row[: grid.d])
        flat = int(np.ravel_multi_index(idx, grid.n))
        packed[flat] = row[grid.d :]
    return MatrixMeasureField.from_packed(grid, packed)


def save_result(result: RecoveryResult, json_path, csv_name: str) -> None:
    """Scalar outcome as JSON; the field itself goes to ``csv_name``."""
    _dump(
        {
            "residual_inf": result.residual_inf,
            "min_eigenvalue": result.min_eigenvalue,
            "total_trace": result.total_trace,
            "trace_budget": result.trace_budget,
            "iterations": result.iterations,
            "converged": result.converged,
            "field_csv": csv_name,
        },
        json_path,
    )


def load_result(json_path):
    return _load(json_path)


def save_certificate(cert: PolarCertificate1D, path) -> None:
    _dump(
        {
            "inner_product": cert.inner_product,
            "primitive": cert.primitive.tolist(),
            "feasible": cert.feasible,
            "tol_eq": cert.tol_eq,
            "tol_pos": cert.tol_pos,
        },
        path,
    )


def write_trajectory_csv(rows, path) -> None:
    """Rows of (t, index, X, V, block_id)."""
    with open(path, "w") as fh:
        fh.write("t,index,X,V,block_id\n")
        for t, index, x, v, block in rows:
            fh.write(f"{repr(float(t))},{index},{repr(float(x))},{repr(float(v))},{block}\n")
