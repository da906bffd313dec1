"""
Energy diagnostics for discrete cart-pole trajectories.

The continuous reduced state is reconstructed at every node k = 2 .. N-2:
velocities by central differences, accelerations by second differences,
and the momentum p1theta from the discrete control and multiplier,

    p1theta(t_k) ~ -m l cos(theta_k) u_k + s lambda^{k-1},    s ~ -m l^2

where lambda is a multiplier of the unscaled reduction, i.e. a flow
multiplier divided by cp_multiplier_factor(h).

The scale s is either the leading-order value or a least-squares fit
against a continuous reference; both are reported.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.models.core import DiscretePath, MultiplierSeq, config_point, multiplier
from src.schemas.cartpole import CartPoleParams
from src.services.cartpole import (
    ReducedState, cp_F, cp_H_W1, cp_multiplier_factor, cp_xddot, rk4_integrate,
)
from src.services.ocp_reduce import ControlSeq
from src.utils.exceptions import ContractError

logger = logging.getLogger(__name__)


def predicted_scale(p: CartPoleParams) -> float:
    """Leading-order multiplier scale -m l^2."""
    return -p.m * p.l ** 2


@dataclass(frozen=True)
class ScaleFit:
    predicted: float
    fitted: float
    samples: int


@dataclass(frozen=True)
class BandReport:
    amplitude: float
    max_deviation: float
    trend: float
    passed: bool


def _node_arrays(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
                 controls: ControlSeq, scale: float):
    N, h = path.N, path.h
    if N < 4:
        raise ContractError(f"reconstruction needs N >= 4, got {N}")
    x, th = path.points[:, 0], path.points[:, 1]
    nan = np.full(N + 1, np.nan)
    xdot, thdot, xdd, p1, pi = nan.copy(), nan.copy(), nan.copy(), nan.copy(), nan.copy()

    inner = np.arange(1, N)
    factor = cp_multiplier_factor(h)
    xdot[inner] = (x[inner + 1] - x[inner - 1]) / (2.0 * h)
    thdot[inner] = (th[inner + 1] - th[inner - 1]) / (2.0 * h)
    xdd[inner] = (x[inner + 1] - 2.0 * x[inner] + x[inner - 1]) / h ** 2

    for k in inner:
        u_k = float(controls.at(k)[0])
        c = np.cos(th[k])
        p1[k] = -p.m * p.l * c * u_k + scale * float(lams[k - 1][0]) / factor
        F = cp_F(p, th[k], thdot[k], xdd[k])
        D = (p.M + p.m) - p.m * c ** 2
        pi[k] = F * D + p1[k] * c / p.l
    return x, th, xdot, thdot, p1, pi


def reconstruct_states(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
                       controls: ControlSeq, scale: Optional[float] = None) -> List[Optional[ReducedState]]:
    """Reduced states aligned with the path nodes; None where undefined (k < 2 or k > N-2)."""
    scale = predicted_scale(p) if scale is None else scale
    x, th, xdot, thdot, p1, pi = _node_arrays(p, path, lams, controls, scale)
    N, h = path.N, path.h
    states: List[Optional[ReducedState]] = [None] * (N + 1)
    for k in range(2, N - 1):
        states[k] = ReducedState(
            x=float(x[k]), theta=float(th[k]), xdot=float(xdot[k]), thetadot=float(thdot[k]),
            p1theta=float(p1[k]), p1theta_dot=float((p1[k + 1] - p1[k - 1]) / (2.0 * h)),
            pi=float(pi[k]), pi_dot=float((pi[k + 1] - pi[k - 1]) / (2.0 * h)),
        )
    return states


def discrete_to_state(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
                      controls: ControlSeq, k: int, scale: Optional[float] = None) -> ReducedState:
    """Reconstructed reduced state at node k (2 <= k <= N-2)."""
    if not 2 <= k <= path.N - 2:
        raise ContractError(f"a reduced state is reconstructed only for 2 <= k <= {path.N - 2}, got {k}")
    return reconstruct_states(p, path, lams, controls, scale)[k]


def energy_series(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
                  controls: ControlSeq, scale: Optional[float] = None) -> np.ndarray:
    """H on the first constraint submanifold per node; NaN where undefined."""
    states = reconstruct_states(p, path, lams, controls, scale)
    return np.array([np.nan if s is None else cp_H_W1(p, s) for s in states])


def pi_series(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
              controls: ControlSeq, scale: Optional[float] = None) -> np.ndarray:
    """Reconstructed pi per node (defined for k = 1 .. N-1)."""
    scale = predicted_scale(p) if scale is None else scale
    return _node_arrays(p, path, lams, controls, scale)[5]


def calibrate_scale(p: CartPoleParams, path: DiscretePath, lams: MultiplierSeq,
                    controls: ControlSeq, window: int = 20, substeps: int = 10) -> ScaleFit:
    """Fit s in p1theta ~ -m l cos(theta) u + s lambda against a continuous reference.

    The reference is integrated from the state reconstructed at k = 2 with the
    predicted scale. Degenerate data (all multipliers ~ 0) keeps the prediction.
    """
    s0 = predicted_scale(p)
    N, h = path.N, path.h
    last = min(N - 1, 2 + window)
    ks = np.arange(2, last + 1)
    lam = np.array([float(lams[k - 1][0]) for k in ks]) / cp_multiplier_factor(h)
    if float(lam @ lam) <= 1e-24 * max(len(ks), 1):
        logger.debug("multipliers vanish; keeping the predicted scale")
        return ScaleFit(s0, s0, 0)

    start = discrete_to_state(p, path, lams, controls, 2, s0)
    reference = rk4_integrate(p, start, h / substeps, (last - 2) * substeps)
    p_ref = np.array([reference[(k - 2) * substeps].p1theta for k in ks])
    th = path.points[ks, 1]
    u = np.array([float(controls.at(k)[0]) for k in ks])
    target = p_ref + p.m * p.l * np.cos(th) * u
    fitted = float(lam @ target / (lam @ lam))
    logger.info(f"multiplier scale: predicted {s0:.6g}, fitted {fitted:.6g} over {len(ks)} nodes")
    return ScaleFit(s0, fitted, len(ks))


def band_report(H: np.ndarray, window: int = 50, atol: float = 1e-12) -> BandReport:
    """Check that an energy series stays in a band set by its early oscillation.

    Passes when |H_k - H_0| <= 5 x (early-window amplitude) and the fitted
    linear trend over the whole series does not exceed that amplitude.
    """
    H = np.asarray(H, dtype=float)
    H = H[np.isfinite(H)]
    if H.size < 2:
        raise ContractError("an energy band needs at least two defined samples")
    early = H[:window]
    amplitude = float(np.max(early) - np.min(early))
    max_deviation = float(np.max(np.abs(H - H[0])))
    slope = np.polyfit(np.arange(H.size, dtype=float), H, 1)[0]
    trend = float(abs(slope) * H.size)
    passed = max_deviation <= 5.0 * amplitude + atol and trend <= amplitude + atol
    return BandReport(amplitude, max_deviation, trend, bool(passed))


def state_to_seed(p: CartPoleParams, s: ReducedState, h: float,
                  substeps: int = 100) -> Tuple[np.ndarray, ...]:
    """Approximate discrete seed (q0, q1, q2, q3, lam0, lam1) for a continuous state.

    Positions are sampled from an RK4 reference at t = 0, h, 2h, 3h; the
    multipliers invert the leading-order momentum relation at t_1 and t_2
    with u_k ~ -F(t_k). The seed is not projected onto the constraints.
    """
    ref = rk4_integrate(p, s, h / substeps, 3 * substeps)
    nodes = [ref[i * substeps] for i in range(4)]
    qs = [config_point([r.x, r.theta]) for r in nodes]
    scale = predicted_scale(p)
    lams = []
    for r in nodes[1:3]:
        F, _ = cp_xddot(p, r)
        u = -F
        lam = (r.p1theta + p.m * p.l * np.cos(r.theta) * u) / scale
        lams.append(multiplier([lam * cp_multiplier_factor(h)]))
    return (*qs, *lams)
