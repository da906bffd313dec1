"""
Second-order discrete vakonomic mechanics on Q x Q x Q.

The extremality conditions at node k are

    D3 Lt(q_{k-2}, q_{k-1}, q_k) + D2 Lt(q_{k-1}, q_k, q_{k+1}) + D1 Lt(q_k, q_{k+1}, q_{k+2})
        + lambda^{k-2} D3 Phi + lambda^{k-1} D2 Phi + lambda^k D1 Phi = 0
    Phi(q_k, q_{k+1}, q_{k+2}) = 0

with lambda^j attached to the constraint triple (q_j, q_{j+1}, q_{j+2}).
Solving them for (q_{k+2}, lambda^k) gives the flow
(q_{k-2}, ..., q_{k+1}, lambda^{k-2}, lambda^{k-1}) -> (q_{k-1}, ..., q_{k+2}, lambda^{k-1}, lambda^k).
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as LA

from src.models.core import DiscretePath, MultiplierSeq, config_point, multiplier
from src.models.problems import VakonomicProblem2
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.services.newton import damped_newton
from src.utils.exceptions import ContractError, InconsistentSeed, NoConvergence, VakonomicError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowWindow:
    """Four consecutive nodes (q_{k-2} .. q_{k+1}) and multipliers (lambda^{k-2}, lambda^{k-1})."""

    q: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    lam: Tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.q) != 4 or len(self.lam) != 2:
            raise ContractError("a flow window holds four points and two multipliers")
        object.__setattr__(self, "q", tuple(config_point(q) for q in self.q))
        object.__setattr__(self, "lam", tuple(multiplier(lam) for lam in self.lam))

    def constraint_residual(self, p: VakonomicProblem2) -> float:
        """Largest constraint violation over the two triples inside the window."""
        q = self.q
        values = np.concatenate([p.Phi(q[0], q[1], q[2]), p.Phi(q[1], q[2], q[3])])
        return float(np.max(np.abs(values), initial=0.0))


def _history(p: VakonomicProblem2, qm2, qm1, q, q1, lam_m2, lam_m1, settings) -> np.ndarray:
    """The stationarity terms that do not involve the unknowns (q_{k+2}, lambda^k)."""
    older, middle = (qm2, qm1, q), (qm1, q, q1)
    return (p.grad_L(3, older, settings) + p.grad_L(2, middle, settings)
            + p.jac_Phi(3, older, settings).T @ lam_m2
            + p.jac_Phi(2, middle, settings).T @ lam_m1)


def _newest(p: VakonomicProblem2, q, q1, q2, lam, settings) -> Tuple[np.ndarray, np.ndarray]:
    newest = (q, q1, q2)
    stat = p.grad_L(1, newest, settings) + p.jac_Phi(1, newest, settings).T @ lam
    return stat, p.Phi(*newest)


def residual2(p: VakonomicProblem2, q_km2, q_km1, q_k, q_kp1, q_kp2, lam_km2, lam_km1, lam_k,
              settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Stationarity rows (n) at node k followed by the newest constraint triple (m)."""
    p.check_shapes((q_km2, q_km1, q_k, q_kp1, q_kp2), (lam_km2, lam_km1, lam_k))
    stat, con = _newest(p, q_k, q_kp1, q_kp2, lam_k, settings)
    stat = stat + _history(p, q_km2, q_km1, q_k, q_kp1, lam_km2, lam_km1, settings)
    return np.concatenate([stat, con])


def kkt2(p: VakonomicProblem2, x, y, z, lam,
         settings: SolverSettings = DEFAULT_SETTINGS) -> Tuple[np.ndarray, float]:
    """Regularity matrix at the triple (x, y, z) and its LU determinant.

    Layout: [[D13 Lt + lam . D13 Phi, (D1 Phi)^T], [D3 Phi, 0]], the Jacobian of
    ``residual2`` with respect to (q_{k+2}, lambda^k).
    """
    p.check_shapes((x, y, z), (lam,))
    pts = (x, y, z)
    top_left = p.mixed_L(1, 3, pts, settings)
    if p.m:
        top_left = top_left + np.tensordot(lam, p.mixed_Phi(1, 3, pts, settings), axes=1)
    matrix = np.block([
        [top_left, p.jac_Phi(1, pts, settings).T],
        [p.jac_Phi(3, pts, settings), np.zeros((p.m, p.m))],
    ])
    return matrix, float(LA.det(matrix))


def step2(p: VakonomicProblem2, window: FlowWindow,
          settings: SolverSettings = DEFAULT_SETTINGS,
          check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Solve for (q_{k+2}, lambda^k) given a flow window.

    ``check=False`` skips the constraint precondition on the window (used
    when the seed is itself an unknown, as in shooting).
    """
    qm2, qm1, q, q1 = window.q
    lam_m2, lam_m1 = window.lam
    p.check_shapes(window.q, window.lam)
    if check:
        violation = window.constraint_residual(p)
        if violation > 10 * settings.newton_tol:
            raise InconsistentSeed(f"window violates the constraints: {violation:.3e}", residual=violation)

    n = p.n
    history = _history(p, qm2, qm1, q, q1, lam_m2, lam_m1, settings)

    def residual(zv):
        stat, con = _newest(p, q, q1, zv[:n], zv[n:], settings)
        return np.concatenate([stat + history, con])

    def jacobian(zv):
        return kkt2(p, q, q1, zv[:n], zv[n:], settings)[0]

    z0 = np.concatenate([2.0 * q1 - q, lam_m1])
    result = damped_newton(residual, jacobian, z0, settings, label="step2")
    return config_point(result.x[:n]), multiplier(result.x[n:])


def flow2(p: VakonomicProblem2, q0, q1, q2, q3, lam0, lam1, N: int,
          settings: SolverSettings = DEFAULT_SETTINGS,
          h: float = 1.0, check_seed: bool = True) -> Tuple[DiscretePath, MultiplierSeq]:
    """Run the second-order flow from the seed up to node N.

    Returns the path q_0 .. q_N and the multipliers lambda^0 .. lambda^{N-2}
    (one per constraint triple of the path).
    """
    if N < 4:
        raise ContractError(f"flow2 needs N >= 4, got {N}")
    points = [config_point(q, p.n) for q in (q0, q1, q2, q3)]
    lams = [multiplier(lam0, p.m), multiplier(lam1, p.m)]
    if check_seed:
        seed = FlowWindow(tuple(points), tuple(lams))
        violation = seed.constraint_residual(p)
        if violation > 10 * settings.newton_tol:
            raise InconsistentSeed(f"seed violates the constraints: {violation:.3e}", residual=violation)

    for k in range(2, N - 1):
        win = FlowWindow(tuple(points[k - 2:k + 2]), (lams[k - 2], lams[k - 1]))
        try:
            q_next, lam = step2(p, win, settings, check=False)
        except VakonomicError as exc:
            logger.error(f"flow2 failed at node {k}: {exc}")
            raise exc.at_index(k)
        points.append(q_next)
        lams.append(lam)

    logger.debug(f"flow2 completed {N - 3} steps (n={p.n}, m={p.m})")
    return DiscretePath(points, h), MultiplierSeq(lams, p.m)


def project_seed(p: VakonomicProblem2, q0, q1, q2, q3,
                 settings: SolverSettings = DEFAULT_SETTINGS) -> Tuple[np.ndarray, np.ndarray]:
    """Move (q2, q3) onto Phi(q0,q1,q2) = 0 and Phi(q1,q2,q3) = 0.

    Gauss-Newton with minimum-norm corrections, so a consistent seed comes
    back unchanged.
    """
    q0, q1 = config_point(q0, p.n), config_point(q1, p.n)
    w = np.concatenate([config_point(q2, p.n), config_point(q3, p.n)])
    n = p.n
    if p.m == 0:
        return config_point(w[:n]), config_point(w[n:])

    for it in range(settings.max_iter):
        a, b = w[:n], w[n:]
        c = np.concatenate([p.Phi(q0, q1, a), p.Phi(q1, a, b)])
        norm = float(np.max(np.abs(c)))
        if norm <= settings.newton_tol:
            break
        J = np.block([
            [p.jac_Phi(3, (q0, q1, a), settings), np.zeros((p.m, n))],
            [p.jac_Phi(2, (q1, a, b), settings), p.jac_Phi(3, (q1, a, b), settings)],
        ])
        dw = -LA.lstsq(J, c)[0]
        w = w + dw
        if np.max(np.abs(dw)) <= settings.step_tol * (1.0 + np.max(np.abs(w))):
            break
    else:
        raise NoConvergence(f"seed projection did not converge (|Phi|={norm:.3e})",
                            iterations=settings.max_iter, residual=norm)

    logger.debug(f"seed projected in {it} iterations")
    return config_point(w[:n]), config_point(w[n:])
