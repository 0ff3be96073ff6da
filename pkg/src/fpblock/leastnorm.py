"""Least-norm correction of a reference field toward the operator's kernel.

Given the interior operator A and a reference v, the solve returns the
minimizer of ||u - v||_2 subject to A u = 0. Writing u = A^T y + v, the
multiplier solves the normal system (A A^T) y = -A v, which is symmetric
positive definite whenever A has full row rank; it is attacked with plain
conjugate gradients. The correction A^T y is orthogonal to Ker(A), so the
result equals v plus the kernel-orthogonal move of minimal length.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    NonConvergenceError,
    RankDeficiencyError,
)
from .grids import DensityField
from .operator import InteriorOperator


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for the normal-equations conjugate-gradient loop.

    cg_max_iters of None means ten times the number of interior rows.
    warm_start, if given, seeds the multiplier vector y, not the density.
    """

    cg_rel_tol: float = 1e-10
    cg_max_iters: int | None = None
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.cg_rel_tol < 1.0:
            raise ConfigurationError(
                f"cg_rel_tol must lie in (0, 1), got {self.cg_rel_tol}"
            )
        if self.cg_max_iters is not None and self.cg_max_iters < 1:
            raise ConfigurationError("cg_max_iters must be positive")


@dataclass(frozen=True)
class SolveReport:
    """What the solve did and how well the constraint came out."""

    iterations: int
    residual_constraint: float
    distance: float
    min_value: float
    wall_time: float


def _cg(mat, b: np.ndarray, rel_tol: float, max_iters: int, x0=None):
    """Conjugate gradients on an SPD sparse matrix, residual history kept."""
    b_norm = float(np.linalg.norm(b))
    b_inf = float(np.max(np.abs(b))) if b.size else 0.0
    if b_norm == 0.0:
        return np.zeros_like(b), 0, [0.0]
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - mat @ x
    p = r.copy()
    rr = float(r @ r)
    history = [float(np.sqrt(rr))]

    def converged() -> bool:
        return (
            np.sqrt(rr) <= rel_tol * b_norm
            and np.max(np.abs(r)) <= 10.0 * rel_tol * b_inf
        )

    iters = 0
    while not converged():
        if iters >= max_iters:
            raise NonConvergenceError(
                f"conjugate gradients stalled at relative residual "
                f"{history[-1] / b_norm:.3e} after {iters} iterations",
                residual_history=history,
            )
        q = mat @ p
        curv = float(p @ q)
        if curv <= 0.0:
            raise RankDeficiencyError(
                "non-positive curvature in the normal system: the operator "
                "appears rank deficient"
            )
        alpha = rr / curv
        x += alpha * p
        r -= alpha * q
        rr_new = float(r @ r)
        history.append(float(np.sqrt(rr_new)))
        p = r + (rr_new / rr) * p
        rr = rr_new
        iters += 1
    return x, iters, history


def solve_least_norm(
    op: InteriorOperator,
    v: DensityField,
    opts: SolveOptions | None = None,
) -> tuple[DensityField, SolveReport]:
    """Minimal-distance projection of v onto the constraint set A u = 0.

    Args:
        op: interior operator assembled on v's grid.
        v: reference field, typically a sampled histogram density.
        opts: solver options; defaults are tight enough for the diagnostics.

    Returns:
        The corrected field and a report with iteration count, the worst
        constraint residual max|A u|, the moved distance ||u - v||_2, the
        most negative value of u, and wall time.
    """
    if opts is None:
        opts = SolveOptions()
    if v.grid != op.grid:
        raise DimensionError("reference field and operator live on different grids")
    t0 = time.perf_counter()
    a = op.matrix
    b = -(a @ v.values)
    max_iters = opts.cg_max_iters
    if max_iters is None:
        max_iters = 10 * a.shape[0]
    y, iters, _ = _cg(op.normal_matrix(), b, opts.cg_rel_tol, max_iters, opts.warm_start)
    correction = a.T @ y
    u = v.values + correction
    field = DensityField(v.grid, u)
    report = SolveReport(
        iterations=iters,
        residual_constraint=float(np.max(np.abs(a @ u))),
        distance=float(np.linalg.norm(correction)),
        min_value=field.min_value,
        wall_time=time.perf_counter() - t0,
    )
    return field, report


def project_onto_subspace(basis: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal projection of w onto the span of orthonormal columns.

    The basis is validated: its Gram matrix must match the identity to
    1e-10, otherwise the projection formula B B^T w would silently be wrong.
    """
    basis = np.asarray(basis, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    if basis.ndim != 2 or basis.shape[0] != w.size:
        raise DimensionError(
            f"basis of shape {basis.shape} cannot project a vector of length {w.size}"
        )
    gram = basis.T @ basis
    if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-10:
        raise ConfigurationError("basis columns are not orthonormal")
    return basis @ (basis.T @ w)
