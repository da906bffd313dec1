"""
Cart-pole benchmark.

Continuous side: the Lagrangian, the constraint theta'' = G(theta, x''), the
restricted cost Lt_M = 1/2 F^2, the regularity scalar R, the reduced
fourth-order dynamics on the first constraint submanifold (written as a
first-order system in ``ReducedState``) and its conserved Hamiltonian.

Discrete side: the midpoint discrete Lagrangian with analytic first and
second derivatives, the printed discrete constraint, and the controlled
system / reduced second-order problem built from them.

Coordinates are q = (x, theta); theta = 0 is the upright pendulum.
"""

import logging
from dataclasses import astuple, dataclass, fields
from typing import Callable, Dict, List, Tuple

import numpy as np

from src.models.core import DofSplit
from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.models.problems import VakonomicProblem1, VakonomicProblem2
from src.schemas.cartpole import CartPoleParams
from src.services.ocp_reduce import ControlledDiscreteSystem, quadratic_cost, reduce
from src.utils.exceptions import ContractError, IntegrationBlowUp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReducedState:
    x: float
    theta: float
    xdot: float
    thetadot: float
    p1theta: float
    p1theta_dot: float
    pi: float
    pi_dot: float

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "ReducedState":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape[0] != len(fields(cls)):
            raise ContractError(f"a reduced state has {len(fields(cls))} entries, got {values.shape[0]}")
        return cls(*(float(v) for v in values))


# Continuous model

def cp_lagrangian(p: CartPoleParams, x: float, theta: float, xdot: float, thetadot: float) -> float:
    kinetic = 0.5 * p.M * xdot ** 2 + 0.5 * p.m * (
        xdot ** 2 + 2.0 * xdot * p.l * thetadot * np.cos(theta) + p.l ** 2 * thetadot ** 2)
    return float(kinetic - p.m * p.g * p.l * np.cos(theta) - p.m * p.g * p.hbar)


def cp_G(p: CartPoleParams, theta: float, xddot: float) -> float:
    """Pendulum acceleration forced by the cart: (g sin(theta) - x'' cos(theta)) / l."""
    return float((p.g * np.sin(theta) - xddot * np.cos(theta)) / p.l)


def cp_force_u(p: CartPoleParams, theta: float, thetadot: float, xddot: float, thetaddot: float) -> float:
    """Control force along the track."""
    return float((p.M + p.m) * xddot - p.m * p.l * thetadot ** 2 * np.sin(theta)
                 + p.m * p.l * thetaddot * np.cos(theta))


def _inertia(p: CartPoleParams, theta: float) -> float:
    return (p.M + p.m) - p.m * np.cos(theta) ** 2


def cp_F(p: CartPoleParams, theta: float, thetadot: float, xddot: float) -> float:
    """The control force with theta'' eliminated through G."""
    s, c = np.sin(theta), np.cos(theta)
    return float((p.M + p.m) * xddot - p.m * p.l * thetadot ** 2 * s
                 + p.m * p.g * c * s - p.m * xddot * c ** 2)


def cp_Ltilde_M(p: CartPoleParams, theta: float, thetadot: float, xddot: float) -> float:
    return 0.5 * cp_F(p, theta, thetadot, xddot) ** 2


def cp_R(p: CartPoleParams, theta: float) -> float:
    """Regularity scalar ((M + m) - m cos^2 theta)^2, bounded below by M^2."""
    return float(_inertia(p, theta) ** 2)


def _F_theta(p: CartPoleParams, theta: float, thetadot: float, xddot: float) -> float:
    s, c = np.sin(theta), np.cos(theta)
    return (-p.m * p.l * thetadot ** 2 * c + p.m * p.g * (c ** 2 - s ** 2)
            + 2.0 * p.m * xddot * c * s)


def cp_Ltilde_M_partials(p: CartPoleParams, theta: float, thetadot: float, xddot: float) -> np.ndarray:
    """(dLt_M/dtheta, dLt_M/dthetadot, dLt_M/dxddot)."""
    F = cp_F(p, theta, thetadot, xddot)
    return np.array([
        F * _F_theta(p, theta, thetadot, xddot),
        F * (-2.0 * p.m * p.l * thetadot * np.sin(theta)),
        F * _inertia(p, theta),
    ])


def cp_G_partials(p: CartPoleParams, theta: float, thetadot: float, xddot: float) -> np.ndarray:
    """(dG/dtheta, dG/dthetadot, dG/dxddot); G does not depend on thetadot."""
    s, c = np.sin(theta), np.cos(theta)
    return np.array([(p.g * c + xddot * s) / p.l, 0.0, -c / p.l])


def cp_xddot(p: CartPoleParams, s: ReducedState) -> Tuple[float, float]:
    """Recover (F, x'') from the state through pi = F D + p1theta cos(theta) / l."""
    D = _inertia(p, s.theta)
    sn, c = np.sin(s.theta), np.cos(s.theta)
    F = (s.pi - s.p1theta * c / p.l) / D
    xddot = (F + p.m * p.l * s.thetadot ** 2 * sn - p.m * p.g * c * sn) / D
    return float(F), float(xddot)


def cp_reduced_rhs(p: CartPoleParams, s: ReducedState) -> ReducedState:
    """Time derivative of the reduced state.

    pi'' = 0 because neither Lt_M nor G depends on (x, x'). The momentum
    equation reads p1theta'' = d/dt(dLt_M/dthetadot) - dLt_M/dtheta + p1theta dG/dtheta.
    """
    sn, c = np.sin(s.theta), np.cos(s.theta)
    D = _inertia(p, s.theta)
    F, xddot = cp_xddot(p, s)
    thetaddot = cp_G(p, s.theta, xddot)

    numerator = s.pi - s.p1theta * c / p.l
    numerator_dot = s.pi_dot - s.p1theta_dot * c / p.l + s.p1theta * sn * s.thetadot / p.l
    D_dot = 2.0 * p.m * c * sn * s.thetadot
    F_dot = (numerator_dot * D - numerator * D_dot) / D ** 2

    K_dot = -2.0 * p.m * p.l * (thetaddot * sn * F + s.thetadot ** 2 * c * F + s.thetadot * sn * F_dot)
    G_theta = (p.g * c + xddot * sn) / p.l
    p1theta_ddot = K_dot - F * _F_theta(p, s.theta, s.thetadot, xddot) + s.p1theta * G_theta

    return ReducedState(
        x=s.xdot, theta=s.thetadot, xdot=xddot, thetadot=thetaddot,
        p1theta=s.p1theta_dot, p1theta_dot=float(p1theta_ddot),
        pi=s.pi_dot, pi_dot=0.0,
    )


def cp_H_W1(p: CartPoleParams, s: ReducedState) -> float:
    """Hamiltonian restricted to the first constraint submanifold.

    Momenta: p1_x = pi, p0_x = -pi', p0_theta = dLt_M/dthetadot - p1theta'.
    """
    F, xddot = cp_xddot(p, s)
    K = -2.0 * p.m * p.l * s.thetadot * np.sin(s.theta) * F
    p0_x = -s.pi_dot
    p0_theta = K - s.p1theta_dot
    return float(p0_x * s.xdot + p0_theta * s.thetadot + s.pi * xddot
                 + s.p1theta * cp_G(p, s.theta, xddot) - 0.5 * F ** 2)


def rk4_integrate(p: CartPoleParams, s0: ReducedState, dt: float, steps: int) -> List[ReducedState]:
    """Fixed-step classical Runge-Kutta; returns steps + 1 states including s0."""
    if not (np.isfinite(dt) and dt > 0):
        raise ContractError(f"time step must be positive, got {dt}")
    if steps < 0:
        raise ContractError(f"number of steps must be non-negative, got {steps}")

    def f(y):
        return cp_reduced_rhs(p, ReducedState.from_array(y)).to_array()

    y = s0.to_array()
    out = [s0]
    for i in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationBlowUp(f"non-finite state after step {i + 1}", index=i + 1)
        out.append(ReducedState.from_array(y))
    return out


# Discrete model

def _midpoint_vars(h: float, q_prev, q) -> Tuple[float, float, float]:
    a = (q[0] - q_prev[0]) / h
    b = (q[1] - q_prev[1]) / h
    mu = 0.5 * (q[1] + q_prev[1])
    return a, b, mu


def _chain(h: float) -> np.ndarray:
    # d(a, b, mu) / d(x_prev, theta_prev, x, theta)
    return np.array([
        [-1.0 / h, 0.0, 1.0 / h, 0.0],
        [0.0, -1.0 / h, 0.0, 1.0 / h],
        [0.0, 0.5, 0.0, 0.5],
    ])


def cp_discrete_Ld(p: CartPoleParams, h: float, q_prev, q) -> float:
    """Midpoint discrete Lagrangian on (x_{k-1}, theta_{k-1}), (x_k, theta_k)."""
    a, b, mu = _midpoint_vars(h, q_prev, q)
    kinetic = 0.5 * p.M * a ** 2 + 0.5 * p.m * (a ** 2 + 2.0 * a * p.l * np.cos(mu) * b + p.l ** 2 * b ** 2)
    return float(kinetic - p.m * p.g * p.l * np.cos(mu) - p.m * p.g * p.hbar)


def _Ld_gradient_local(p: CartPoleParams, a: float, b: float, mu: float) -> np.ndarray:
    c, s = np.cos(mu), np.sin(mu)
    ml = p.m * p.l
    return np.array([
        (p.M + p.m) * a + ml * b * c,
        ml * a * c + ml * p.l * b,
        -ml * a * b * s + p.m * p.g * p.l * s,
    ])


def _Ld_hessian_local(p: CartPoleParams, a: float, b: float, mu: float) -> np.ndarray:
    c, s = np.cos(mu), np.sin(mu)
    ml = p.m * p.l
    return np.array([
        [p.M + p.m, ml * c, -ml * b * s],
        [ml * c, ml * p.l, -ml * a * s],
        [-ml * b * s, -ml * a * s, -ml * a * b * c + p.m * p.g * p.l * c],
    ])


def cp_discrete_Ld_grad(p: CartPoleParams, h: float, slot: int, q_prev, q) -> np.ndarray:
    """D_slot L_d, slot 1 or 2."""
    J = _chain(h)
    full = J.T @ _Ld_gradient_local(p, *_midpoint_vars(h, q_prev, q))
    return full[:2] if slot == 1 else full[2:]


def cp_discrete_Ld_hessian(p: CartPoleParams, h: float, q_prev, q) -> np.ndarray:
    """4x4 Hessian of L_d over (x_prev, theta_prev, x, theta)."""
    J = _chain(h)
    return J.T @ _Ld_hessian_local(p, *_midpoint_vars(h, q_prev, q)) @ J


def cp_discrete_Phi(p: CartPoleParams, h: float, q_k, q_k1, q_k2) -> float:
    """The printed discrete constraint; equals h^2 times the discrete theta equation."""
    x0, t0 = q_k
    x1, t1 = q_k1
    x2, t2 = q_k2
    m, l, g = p.m, p.l, p.g
    mu1, mu2 = 0.5 * (t1 + t0), 0.5 * (t2 + t1)
    return float(
        l ** 2 * m * (2.0 * t1 - t0 - t2)
        + l * m * ((x1 - x0) * np.cos(mu1) - (x2 - x1) * np.cos(mu2))
        + 0.5 * l * m * g * h ** 2 * (np.sin(mu1) + np.sin(mu2))
        - 0.5 * l * m * ((x1 - x0) * (t1 - t0) * np.sin(mu1) + (x2 - x1) * (t2 - t1) * np.sin(mu2))
    )


def cp_problem_scales(h: float) -> Tuple[float, float]:
    """Factors (h^4, h^2) applied to the reduced cost and constraint.

    The unscaled reduction carries u ~ 1/h^2; with these factors every block
    of the step Jacobian is O(1).
    """
    return h ** 4, h ** 2


def cp_multiplier_factor(h: float) -> float:
    """Multipliers of the scaled reduction divided by those of the unscaled one."""
    cost_factor, constraint_factor = cp_problem_scales(h)
    return cost_factor / constraint_factor


def cp_discrete_system(p: CartPoleParams, h: float) -> Tuple[ControlledDiscreteSystem, VakonomicProblem2]:
    """Controlled discrete cart-pole (x actuated, theta free, C = 1/2 u^2) and its scaled reduction.

    The reduced constraint equals ``cp_discrete_Phi``; multipliers relate to
    the unscaled reduction through ``cp_multiplier_factor``.
    """
    if not (np.isfinite(h) and h > 0):
        raise ContractError(f"time step must be positive, got {h}")
    split = DofSplit(2, (0,), (1,))
    cost, cost_derivatives = quadratic_cost(2, split.actuated)

    def d2Ld(i, j, x, y):
        H = cp_discrete_Ld_hessian(p, h, x, y)
        return H[2 * (i - 1):2 * i, 2 * (j - 1):2 * j]

    sys = ControlledDiscreteSystem(
        Ld=SlottedScalarFn(2, 2, lambda x, y: cp_discrete_Ld(p, h, x, y)),
        split=split,
        cost=cost,
        dLd=lambda slot, x, y: cp_discrete_Ld_grad(p, h, slot, x, y),
        d2Ld=d2Ld,
        cost_derivatives=cost_derivatives,
    )
    return sys, reduce(sys).scaled(*cp_problem_scales(h))


def derivative_registry(p: CartPoleParams, h: float) -> Dict[str, Tuple[Callable, SlottedScalarFn, int]]:
    """Every hand-coded partial, keyed by name, as (analytic, function, slot).

    The continuous partials of Lt_M and G are registered on the packed
    variable (theta, thetadot, xddot) in slot 1 of an arity-2 function whose
    second slot is ignored.

    The reduced-problem entries check the unscaled reduction, whose partials
    are not shrunk by the h factors.
    """
    sys, _ = cp_discrete_system(p, h)
    problem = reduce(sys)
    registry: Dict[str, Tuple[Callable, SlottedScalarFn, int]] = {}

    for slot in (1, 2):
        registry[f"Ld.D{slot}"] = (
            lambda x, y, slot=slot: cp_discrete_Ld_grad(p, h, slot, x, y), sys.Ld, slot)
    for slot in (1, 2):
        for row in (0, 1):
            grad_row = SlottedScalarFn(2, 2, lambda x, y, slot=slot, row=row: cp_discrete_Ld_grad(p, h, slot, x, y)[row])
            for other in (1, 2):
                registry[f"Ld.D{slot}{other}[{row}]"] = (
                    lambda x, y, slot=slot, other=other, row=row: sys.d2Ld(slot, other, x, y)[row],
                    grad_row, other)

    for slot in (1, 2, 3):
        registry[f"Ltilde_d.D{slot}"] = (
            lambda x, y, z, slot=slot: problem.dL(slot, x, y, z), problem.L, slot)
        registry[f"Phi_d.D{slot}"] = (
            lambda x, y, z, slot=slot: problem.dPhi(slot, x, y, z)[0], problem.Phi.component(0), slot)
    for row in (0, 1):
        grad_row = SlottedScalarFn(3, 2, lambda x, y, z, row=row: problem.dL(1, x, y, z)[row])
        registry[f"Ltilde_d.D13[{row}]"] = (
            lambda x, y, z, row=row: problem.d2L(1, 3, x, y, z)[row], grad_row, 3)

    registry["Ltilde_M"] = (
        lambda v, _: cp_Ltilde_M_partials(p, *v),
        SlottedScalarFn(2, 3, lambda v, _: cp_Ltilde_M(p, *v)), 1)
    registry["G"] = (
        lambda v, _: cp_G_partials(p, *v),
        SlottedScalarFn(2, 3, lambda v, _: cp_G(p, v[0], v[2])), 1)
    return registry


def derivative_samples(name: str, count: int, seed: int = 0) -> List[Tuple[np.ndarray, ...]]:
    """Random bounded sample points for a registry entry (|x| <= 0.5, |theta| <= 1)."""
    rng = np.random.default_rng(seed)
    if name in ("Ltilde_M", "G"):
        return [(rng.uniform([-np.pi, -1.0, -2.0], [np.pi, 1.0, 2.0]), np.zeros(3)) for _ in range(count)]
    arity = 3 if name.startswith(("Ltilde_d", "Phi_d")) else 2
    box_lo, box_hi = [-0.5, -1.0], [0.5, 1.0]
    return [tuple(rng.uniform(box_lo, box_hi) for _ in range(arity)) for _ in range(count)]


def cp_free_problem(p: CartPoleParams, h: float) -> VakonomicProblem1:
    """Unforced discrete cart-pole (both coordinates free) as a first-order problem.

    Its flow generates seeds on the uncontrolled motion, which solves the
    reduced problem with u = 0 and vanishing multipliers.
    """
    if not (np.isfinite(h) and h > 0):
        raise ContractError(f"time step must be positive, got {h}")

    def d2Ld(i, j, x, y):
        H = cp_discrete_Ld_hessian(p, h, x, y)
        return H[2 * (i - 1):2 * i, 2 * (j - 1):2 * j]

    return VakonomicProblem1(
        n=2, m=0,
        L=SlottedScalarFn(2, 2, lambda x, y: cp_discrete_Ld(p, h, x, y)),
        Phi=SlottedVectorFn(2, 2, 0, lambda x, y: np.zeros(0)),
        dL=lambda slot, x, y: cp_discrete_Ld_grad(p, h, slot, x, y),
        d2L=d2Ld,
    )
