"""Dense symmetric linear-algebra kernels with uniform tolerances.

Thin wrappers over LAPACK (through numpy/scipy) that add the symmetry
validation, failure signaling and condition checks the solver relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve


@dataclass(frozen=True)
class Tolerances:
    symmetry: float = 1e-12
    eig_reconstruction: float = 1e-10
    solve_residual: float = 1e-9
    condition_limit: float = 1e13


DEFAULT_TOLERANCES = Tolerances()


class NotPositiveDefiniteError(Exception):
    """Raised when a Cholesky factorization meets a nonpositive pivot."""


class IllConditionedError(Exception):
    def __init__(self, estimate: float):
        super().__init__(f"condition estimate {estimate:.3e} beyond limit")
        self.estimate = estimate


def check_symmetric(m, tols: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > tols.symmetry:
        raise ValueError("matrix is not symmetric")
    return m


def sym_eig(m, tols: Tolerances = DEFAULT_TOLERANCES):
    """Eigenvalues (ascending) and orthonormal eigenvectors, columns."""
    m = check_symmetric(m, tols)
    w, vecs = np.linalg.eigh(m)
    return w, vecs


def cholesky(m, tols: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Lower Cholesky factor; NotPositiveDefiniteError when indefinite."""
    m = check_symmetric(m, tols)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def solve_linear(a, b, tols: Tolerances = DEFAULT_TOLERANCES):
    """Solve a @ x = b with a condition estimate and a residual check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square system, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError("right-hand side does not match the matrix")
    try:
        lu, piv = lu_factor(a)
    except ValueError as exc:
        raise IllConditionedError(float("inf")) from exc
    anorm = np.linalg.norm(a, 1) if a.size else 0.0
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0.0:
        raise IllConditionedError(float("inf"))
    estimate = 1.0 / rcond
    if estimate > tols.condition_limit:
        raise IllConditionedError(estimate)
    x = lu_solve((lu, piv), b)
    resid = np.linalg.norm(a @ x - b)
    bound = tols.solve_residual * (
        np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)
    )
    if resid > max(bound, tols.solve_residual):
        raise IllConditionedError(estimate)
    return x
