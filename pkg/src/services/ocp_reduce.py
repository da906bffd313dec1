"""
Discrete underactuated optimal control as a second-order vakonomic problem.

A controlled discrete system is forced only along its actuated coordinates:

    D2^a L_d(q_{k-1}, q_k) + D1^a L_d(q_k, q_{k+1}) = u_k^a
    D2^alpha L_d(q_{k-1}, q_k) + D1^alpha L_d(q_k, q_{k+1}) = 0

Eliminating u turns the cost sum_{k=1}^{N-1} C(q_k, q_{k+1}, u_k) into the
action of Lt(q_{k-1}, q_k, q_{k+1}) = C(q_k, q_{k+1}, u_k) subject to the
unactuated equations as constraints.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.models.core import DiscretePath, DofSplit, MultiplierSeq, config_point, multiplier, validate_split
from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.models.problems import VakonomicProblem2
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.services import numdiff
from src.services.newton import damped_newton
from src.services.vak2 import flow2, project_seed
from src.utils.exceptions import ContractError, InconsistentSeed, RangeError

logger = logging.getLogger(__name__)


class CostDerivatives(NamedTuple):
    """Partials of a running cost C(q_k, q_{k+1}, u) at one point."""

    C_q: np.ndarray     # (n,)
    C_qn: np.ndarray    # (n,)
    C_u: np.ndarray     # (na,)
    C_uu: np.ndarray    # (na, na)
    C_uqn: np.ndarray   # (na, n)


@dataclass(frozen=True)
class ControlledDiscreteSystem:
    """Discrete Lagrangian, actuation split and running cost.

    ``dLd(slot, x, y)`` and ``d2Ld(i, j, x, y)`` are optional analytic
    derivatives of L_d; ``cost_derivatives(q, q_next, u)`` optionally returns
    ``CostDerivatives``. With all three present the reduced problem is fully
    analytic.
    """

    Ld: SlottedScalarFn
    split: DofSplit
    cost: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    dLd: Optional[Callable[..., np.ndarray]] = None
    d2Ld: Optional[Callable[..., np.ndarray]] = None
    cost_derivatives: Optional[Callable[..., CostDerivatives]] = None

    def __post_init__(self):
        if self.Ld.arity != 2:
            raise ContractError("the discrete Lagrangian must have arity 2")
        if self.split.n != self.Ld.dim:
            raise ContractError(f"split dimension {self.split.n} differs from L_d dimension {self.Ld.dim}")

    @property
    def n(self) -> int:
        return self.Ld.dim

    def grad(self, slot: int, x, y, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        if self.dLd is not None:
            return np.asarray(self.dLd(slot, x, y), dtype=float)
        return numdiff.fd_partial(self.Ld, slot, (x, y), settings)

    def forcing(self, x, y, z, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        """D2 L_d(x, y) + D1 L_d(y, z), all n components."""
        return self.grad(2, x, y, settings) + self.grad(1, y, z, settings)


@dataclass(frozen=True)
class ControlSeq:
    """Controls u_k over the actuated coordinates, for k = start, start+1, ..."""

    u: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    start: int = 1

    def __post_init__(self):
        arr = np.asarray(self.u, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 0))
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        arr.setflags(write=False)
        object.__setattr__(self, "u", arr)

    def __len__(self) -> int:
        return self.u.shape[0]

    def at(self, k: int) -> np.ndarray:
        """Control at node k."""
        if not self.start <= k < self.start + len(self):
            raise RangeError(f"no control at node {k}")
        return self.u[k - self.start]


def quadratic_cost(n: int, actuated: Sequence[int]) -> Tuple[Callable, Callable]:
    """C = 1/2 |u|^2 together with its derivative supplier."""
    na = len(actuated)

    def cost(q, q_next, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * float(u @ u)

    def derivatives(q, q_next, u):
        return CostDerivatives(np.zeros(n), np.zeros(n), np.asarray(u, dtype=float),
                               np.eye(na), np.zeros((na, n)))

    return cost, derivatives


def _analytic_suppliers(sys: ControlledDiscreteSystem):
    """Derivative suppliers of the reduced problem built from those of L_d and C."""
    act = list(sys.split.actuated)
    una = list(sys.split.unactuated)
    n = sys.n

    def d2(i, j, x, y):
        return np.asarray(sys.d2Ld(i, j, x, y), dtype=float)

    def blocks(x, y, z):
        # d(D2 L(x,y) + D1 L(y,z)) / d(x, y, z), all rows
        return d2(2, 1, x, y), d2(2, 2, x, y) + d2(1, 1, y, z), d2(1, 2, y, z)

    def dPhi(slot, x, y, z):
        return blocks(x, y, z)[slot - 1][una, :]

    def d2Phi(i, j, x, y, z):
        # the reduced constraint splits into an (x, y) part and a (y, z) part
        if {i, j} == {1, 3}:
            return np.zeros((len(una), n, n))
        return None

    if sys.cost_derivatives is None:
        return dict(dPhi=dPhi, d2Phi=d2Phi)

    def controls(x, y, z):
        return sys.forcing(x, y, z)[act]

    def dL(slot, x, y, z):
        u = controls(x, y, z)
        cd = sys.cost_derivatives(y, z, u)
        du = blocks(x, y, z)[slot - 1][act, :]
        grad = du.T @ cd.C_u
        if slot == 2:
            grad = grad + cd.C_q
        elif slot == 3:
            grad = grad + cd.C_qn
        return grad

    def d2L(i, j, x, y, z):
        if {i, j} != {1, 3}:
            return None
        u = controls(x, y, z)
        cd = sys.cost_derivatives(y, z, u)
        du_dx = blocks(x, y, z)[0][act, :]
        du_dz = blocks(x, y, z)[2][act, :]
        mixed = du_dx.T @ (cd.C_uu @ du_dz + cd.C_uqn)
        return mixed if i == 1 else mixed.T

    return dict(dL=dL, dPhi=dPhi, d2L=d2L, d2Phi=d2Phi)


def reduce(sys: ControlledDiscreteSystem) -> VakonomicProblem2:
    """The second-order vakonomic problem equivalent to the discrete OCP of ``sys``."""
    report = validate_split(sys.split)
    if not report:
        raise ContractError(f"invalid actuation split: {'; '.join(report.violations)}")

    act = list(sys.split.actuated)
    una = list(sys.split.unactuated)
    n = sys.n

    def Lt(x, y, z):
        return sys.cost(y, z, sys.forcing(x, y, z)[act])

    def Phi(x, y, z):
        return sys.forcing(x, y, z)[una]

    suppliers = {}
    if sys.dLd is not None and sys.d2Ld is not None:
        suppliers = _analytic_suppliers(sys)

    return VakonomicProblem2(
        n=n, m=len(una),
        L=SlottedScalarFn(3, n, Lt),
        Phi=SlottedVectorFn(3, n, len(una), Phi),
        **suppliers,
    )


def recover_controls(sys: ControlledDiscreteSystem, path: DiscretePath,
                     settings: SolverSettings = DEFAULT_SETTINGS) -> ControlSeq:
    """u_k = actuated rows of D2 L_d(q_{k-1}, q_k) + D1 L_d(q_k, q_{k+1}), k = 1 .. N-1."""
    if len(path) < 3:
        raise RangeError(f"recovering controls needs at least 3 path points, got {len(path)}")
    act = list(sys.split.actuated)
    u = [sys.forcing(path[k - 1], path[k], path[k + 1], settings)[act] for k in range(1, path.N)]
    return ControlSeq(np.array(u), start=1)


def total_cost(sys: ControlledDiscreteSystem, path: DiscretePath,
               settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Sum over k = 1 .. N-1 of C(q_k, q_{k+1}, u_k)."""
    controls = recover_controls(sys, path, settings)
    return float(sum(sys.cost(path[k], path[k + 1], controls.at(k)) for k in range(1, path.N)))


def shoot_bvp(p: VakonomicProblem2, q0, q1, qNm1, qN, guess, N: int,
              settings: SolverSettings = DEFAULT_SETTINGS,
              h: float = 1.0) -> Tuple[DiscretePath, MultiplierSeq]:
    """Single shooting for the boundary problem with q0, q1, q_{N-1}, q_N fixed.

    ``guess`` is (q2, q3, lam0, lam1). The shooting unknowns are the same four
    seed quantities; the equations are the endpoint mismatch of ``flow2`` and
    the two seed constraint triples.
    """
    if N < 4:
        raise ContractError(f"shooting needs N >= 4, got {N}")
    n, m = p.n, p.m
    q0, q1 = config_point(q0, n), config_point(q1, n)
    qNm1, qN = config_point(qNm1, n), config_point(qN, n)
    g2, g3, lam0, lam1 = guess
    g2, g3 = config_point(g2, n), config_point(g3, n)
    lam0, lam1 = multiplier(lam0, m), multiplier(lam1, m)

    seed_violation = float(np.max(np.abs(np.concatenate([p.Phi(q0, q1, g2), p.Phi(q1, g2, g3)])), initial=0.0))
    if seed_violation > 1e-3:
        raise InconsistentSeed(f"shooting guess violates the seed constraints: {seed_violation:.3e}",
                               residual=seed_violation)
    g2, g3 = project_seed(p, q0, q1, g2, g3, settings)

    def unpack(w):
        return w[:n], w[n:2 * n], w[2 * n:2 * n + m], w[2 * n + m:]

    def shooting_map(w):
        a, b, l0, l1 = unpack(w)
        path, _ = flow2(p, q0, q1, a, b, l0, l1, N, settings, h=h, check_seed=False)
        return np.concatenate([path[N - 1] - qNm1, path[N] - qN, p.Phi(q0, q1, a), p.Phi(q1, a, b)])

    def jacobian(w):
        return numdiff.fd_jacobian(shooting_map, w, settings)

    # unknowns mix positions and multipliers of very different sensitivity:
    # Newton runs on w = w0 + scales * v with columns equilibrated at the guess
    w0 = np.concatenate([g2, g3, lam0, lam1])
    scales = np.max(np.abs(jacobian(w0)), axis=0)
    scales = 1.0 / np.where(scales > 0.0, scales, 1.0)

    result = damped_newton(lambda v: shooting_map(w0 + scales * v),
                           lambda v: jacobian(w0 + scales * v) * scales,
                           np.zeros_like(w0), settings,
                           tol=100 * settings.newton_tol, by_pivot=True, label="shoot")
    a, b, l0, l1 = unpack(w0 + scales * result.x)
    logger.info(f"shooting converged in {result.iterations} iterations, |S|={result.residual:.3e}")
    return flow2(p, q0, q1, a, b, l0, l1, N, settings, h=h, check_seed=False)
