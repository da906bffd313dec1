"""
First-order discrete vakonomic mechanics on Q x Q.

At every interior node k the unknowns (q_{k+1}, lambda^k) solve

    D1 L_d(q_k, q_{k+1}) + D2 L_d(q_{k-1}, q_k)
        + lambda^k D1 Phi_d(q_k, q_{k+1}) + lambda^{k-1} D2 Phi_d(q_{k-1}, q_k) = 0
    Phi_d(q_k, q_{k+1}) = 0

which defines the discrete flow (q_{k-1}, q_k, lambda^{k-1}) -> (q_k, q_{k+1}, lambda^k).
"""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg as LA

from src.models.core import DiscretePath, MultiplierSeq, config_point, multiplier
from src.models.problems import VakonomicProblem1
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.services.newton import damped_newton
from src.utils.exceptions import InconsistentSeed, VakonomicError

logger = logging.getLogger(__name__)


def residual1(p: VakonomicProblem1, q_prev, q, q_next, lam_prev, lam,
              settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Stationarity rows (n) followed by the constraint rows (m)."""
    p.check_shapes((q_prev, q, q_next), (lam_prev, lam))
    forward, backward = (q, q_next), (q_prev, q)
    stat = (p.grad_L(1, forward, settings) + p.grad_L(2, backward, settings)
            + p.jac_Phi(1, forward, settings).T @ lam
            + p.jac_Phi(2, backward, settings).T @ lam_prev)
    return np.concatenate([stat, p.Phi(*forward)])


def regularity1(p: VakonomicProblem1, q, q_next, lam,
                settings: SolverSettings = DEFAULT_SETTINGS) -> Tuple[np.ndarray, float]:
    """Jacobian of ``residual1`` with respect to (q_next, lam) and its determinant.

    Layout: [[D12 L_d + lam . D12 Phi_d, (D1 Phi_d)^T], [D2 Phi_d, 0]].
    """
    p.check_shapes((q, q_next), (lam,))
    pts = (q, q_next)
    top_left = p.mixed_L(1, 2, pts, settings)
    if p.m:
        top_left = top_left + np.tensordot(lam, p.mixed_Phi(1, 2, pts, settings), axes=1)
    matrix = np.block([
        [top_left, p.jac_Phi(1, pts, settings).T],
        [p.jac_Phi(2, pts, settings), np.zeros((p.m, p.m))],
    ])
    return matrix, float(LA.det(matrix))


def step1(p: VakonomicProblem1, q_prev, q, lam_prev,
          settings: SolverSettings = DEFAULT_SETTINGS) -> Tuple[np.ndarray, np.ndarray]:
    """Advance one node: returns (q_next, lam) solving the difference equations."""
    q_prev, q = config_point(q_prev, p.n), config_point(q, p.n)
    lam_prev = multiplier(lam_prev, p.m)
    n = p.n

    def residual(z):
        return residual1(p, q_prev, q, z[:n], lam_prev, z[n:], settings)

    def jacobian(z):
        return regularity1(p, q, z[:n], z[n:], settings)[0]

    z0 = np.concatenate([2.0 * q - q_prev, lam_prev])
    result = damped_newton(residual, jacobian, z0, settings, label="step1")
    return config_point(result.x[:n]), multiplier(result.x[n:])


def flow1(p: VakonomicProblem1, q0, q1, lam0, N: int,
          settings: SolverSettings = DEFAULT_SETTINGS,
          h: float = 1.0) -> Tuple[DiscretePath, MultiplierSeq]:
    """Iterate ``step1`` from the seed (q0, q1, lam0) up to node N.

    The multiplier sequence starts with the seed ``lam0`` (lambda^0, attached
    to the pair (q0, q1)); for N <= 1 the seed pair is returned unchanged.
    """
    q0, q1 = config_point(q0, p.n), config_point(q1, p.n)
    lam0 = multiplier(lam0, p.m)
    seed_residual = float(np.max(np.abs(p.Phi(q0, q1)), initial=0.0))
    if seed_residual > 10 * settings.newton_tol:
        raise InconsistentSeed(f"seed violates the constraint: |Phi_d(q0, q1)| = {seed_residual:.3e}",
                               residual=seed_residual)

    points, lams = [q0, q1], [lam0]
    for k in range(1, N):
        try:
            q_next, lam = step1(p, points[k - 1], points[k], lams[k - 1], settings)
        except VakonomicError as exc:
            logger.error(f"flow1 failed at node {k}: {exc}")
            raise exc.at_index(k)
        points.append(q_next)
        lams.append(lam)

    logger.info(f"flow1 completed {max(N - 1, 0)} steps (n={p.n}, m={p.m})")
    return DiscretePath(points, h), MultiplierSeq(lams, p.m)
