"""
Small problems with closed-form solutions, used as references by the tests,
by the self-check suite and by the CLI ``biharmonic`` model.

All of them carry analytic derivative suppliers.
"""

import numpy as np

from src.models.core import DofSplit
from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.models.problems import VakonomicProblem1, VakonomicProblem2
from src.services.ocp_reduce import ControlledDiscreteSystem, quadratic_cost


def _kinetic_derivatives(n: int):
    def dL(slot, x, y):
        diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return -diff if slot == 1 else diff

    def d2L(i, j, x, y):
        return np.eye(n) if i == j else -np.eye(n)

    return dL, d2L


def linear_constraint_toy(c: float) -> VakonomicProblem1:
    """Q = R^2, L_d = 1/2 |q_next - q|^2, Phi_d = (y_next - y) - c (x_next - x)."""
    row = np.array([[c, -1.0]])
    dL, d2L = _kinetic_derivatives(2)

    def Ld(q, q_next):
        diff = np.asarray(q_next) - np.asarray(q)
        return 0.5 * float(diff @ diff)

    def Phid(q, q_next):
        return np.array([(q_next[1] - q[1]) - c * (q_next[0] - q[0])])

    return VakonomicProblem1(
        n=2, m=1,
        L=SlottedScalarFn(2, 2, Ld),
        Phi=SlottedVectorFn(2, 2, 1, Phid),
        dL=dL,
        dPhi=lambda slot, x, y: row if slot == 1 else -row,
        d2L=d2L,
        d2Phi=lambda i, j, x, y: np.zeros((1, 2, 2)),
    )


def free_particle(n: int = 2) -> VakonomicProblem1:
    """Unconstrained discrete free particle; its flow is the straight line."""
    dL, d2L = _kinetic_derivatives(n)

    def Ld(q, q_next):
        diff = np.asarray(q_next) - np.asarray(q)
        return 0.5 * float(diff @ diff)

    return VakonomicProblem1(
        n=n, m=0,
        L=SlottedScalarFn(2, n, Ld),
        Phi=SlottedVectorFn(2, n, 0, lambda q, q_next: np.zeros(0)),
        dL=dL, d2L=d2L,
    )


def biharmonic_toy(n: int = 2) -> VakonomicProblem2:
    """Second-difference energy Lt = 1/2 |z - 2y + x|^2 without constraints.

    Its extremality condition is the five-point fourth-difference stencil,
    solved exactly by every cubic sequence.
    """

    def second_difference(x, y, z):
        return np.asarray(z, dtype=float) - 2.0 * np.asarray(y, dtype=float) + np.asarray(x, dtype=float)

    def Lt(x, y, z):
        r = second_difference(x, y, z)
        return 0.5 * float(r @ r)

    weights = {1: 1.0, 2: -2.0, 3: 1.0}

    def dL(slot, x, y, z):
        return weights[slot] * second_difference(x, y, z)

    def d2L(i, j, x, y, z):
        return weights[i] * weights[j] * np.eye(n)

    return VakonomicProblem2(
        n=n, m=0,
        L=SlottedScalarFn(3, n, Lt),
        Phi=SlottedVectorFn(3, n, 0, lambda x, y, z: np.zeros(0)),
        dL=dL, d2L=d2L,
    )


def cubic_sequence(coeffs, N: int) -> np.ndarray:
    """Rows q_k = a + b k + c k^2 + d k^3 for k = 0 .. N; ``coeffs`` is (a, b, c, d)."""
    a, b, c, d = (np.asarray(v, dtype=float) for v in coeffs)
    k = np.arange(N + 1, dtype=float)[:, None]
    return a + b * k + c * k ** 2 + d * k ** 3


def free_particle_system(n: int = 2, actuated=(0,)) -> ControlledDiscreteSystem:
    """L_d = 1/2 |q_next - q|^2 forced along ``actuated`` with C = 1/2 |u|^2."""
    split = DofSplit(n, tuple(actuated), tuple(i for i in range(n) if i not in actuated))
    dL, d2L = _kinetic_derivatives(n)
    cost, cost_derivatives = quadratic_cost(n, split.actuated)

    def Ld(q, q_next):
        diff = np.asarray(q_next) - np.asarray(q)
        return 0.5 * float(diff @ diff)

    return ControlledDiscreteSystem(
        Ld=SlottedScalarFn(2, n, Ld), split=split, cost=cost,
        dLd=dL, d2Ld=d2L, cost_derivatives=cost_derivatives,
    )
