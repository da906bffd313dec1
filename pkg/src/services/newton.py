"""
Damped Newton iteration shared by the step maps, the shooting solver and
the direct-transcription oracle.

The linear algebra is dense LU (scipy.linalg). A step is accepted when it
decreases the infinity norm of the residual; otherwise it is halved up to
``settings.backtrack_max`` times.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg as LA

from src.schemas.settings import SolverSettings
from src.utils.exceptions import NoConvergence, SingularKkt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int


def relative_determinant(J: np.ndarray) -> Tuple[float, float]:
    """Determinant by LU and its size relative to the Hadamard bound."""
    if J.size == 0:
        return 1.0, 1.0
    det = float(LA.det(J))
    row_norms = np.linalg.norm(J, axis=1)
    if np.any(row_norms == 0.0):
        return det, 0.0
    # product of row norms computed in log space to avoid overflow
    log_bound = float(np.sum(np.log(row_norms)))
    if det == 0.0:
        return det, 0.0
    return det, float(np.exp(np.log(abs(det)) - log_bound))


def factor_checked(J: np.ndarray, settings: SolverSettings, by_pivot: bool = False):
    """LU-factor ``J`` after a singularity test.

    With ``by_pivot`` the test looks at the LU pivots (used for large KKT
    systems, where the determinant under- or overflows) and reports the
    offending pivot row; otherwise the relative determinant is tested.
    """
    if by_pivot:
        lu, piv = LA.lu_factor(J, check_finite=True)
        diag = np.abs(np.diag(lu))
        scale = float(np.max(diag)) if diag.size else 1.0
        small = np.flatnonzero(diag <= settings.singular_tol * scale)
        if small.size:
            pivot = int(small[0])
            raise SingularKkt(f"KKT matrix singular at pivot {pivot}", pivot=pivot)
        return lu, piv

    det, rel = relative_determinant(J)
    if rel < settings.singular_tol:
        raise SingularKkt(f"step Jacobian singular: det={det:.3e}, relative={rel:.3e}", rel_det=rel)
    return LA.lu_factor(J, check_finite=True)


def damped_newton(residual: Callable[[np.ndarray], np.ndarray],
                  jacobian: Callable[[np.ndarray], np.ndarray],
                  z0: np.ndarray,
                  settings: SolverSettings,
                  tol: Optional[float] = None,
                  by_pivot: bool = False,
                  label: str = "newton") -> NewtonResult:
    """Solve ``residual(z) = 0`` starting from ``z0``.

    Converged when ||F||_inf <= tol. A Newton correction below
    ``step_tol * (1 + ||z||_inf)`` ends the iteration: the updated iterate
    is returned when its residual is within tol, otherwise NoConvergence is
    raised.
    """
    tol = settings.newton_tol if tol is None else tol
    z = np.array(z0, dtype=float)
    F = np.asarray(residual(z), dtype=float)
    norm = float(np.max(np.abs(F))) if F.size else 0.0

    for it in range(settings.max_iter):
        if norm <= tol:
            return NewtonResult(z, norm, it)

        lu = factor_checked(jacobian(z), settings, by_pivot=by_pivot)
        dz = -LA.lu_solve(lu, F)

        if np.max(np.abs(dz)) <= settings.step_tol * (1.0 + np.max(np.abs(z))):
            z = z + dz
            F = np.asarray(residual(z), dtype=float)
            norm = float(np.max(np.abs(F)))
            logger.debug(f"{label}: correction below step_tol at iteration {it + 1}, |F|={norm:.3e}")
            if norm <= tol:
                return NewtonResult(z, norm, it + 1)
            raise NoConvergence(
                f"{label}: correction below step_tol but |F|={norm:.3e} exceeds tol={tol:.1e}",
                iterations=it + 1, residual=norm,
            )

        t = 1.0
        for _ in range(settings.backtrack_max + 1):
            z_trial = z + t * dz
            F_trial = np.asarray(residual(z_trial), dtype=float)
            norm_trial = float(np.max(np.abs(F_trial)))
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            t *= 0.5
        else:
            raise NoConvergence(
                f"{label}: line search failed at iteration {it + 1} (|F|={norm:.3e})",
                iterations=it + 1, residual=norm,
            )

        logger.debug(f"{label}: iteration {it + 1} |F|={norm_trial:.3e} step={t:g}")
        z, F, norm = z_trial, F_trial, norm_trial

    if norm <= tol:
        return NewtonResult(z, norm, settings.max_iter)
    raise NoConvergence(
        f"{label}: no convergence after {settings.max_iter} iterations (|F|={norm:.3e})",
        iterations=settings.max_iter, residual=norm,
    )
