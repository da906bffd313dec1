"""
Discrete variational problems with constraints.

``VakonomicProblem1`` lives on Q x Q (a discrete Lagrangian L_d and
constraints Phi_d of arity 2); ``VakonomicProblem2`` lives on Q x Q x Q
(a second-order Lagrangian and constraints of arity 3).

Derivatives are routed through optional analytic suppliers and fall back
to the finite-difference engine when a supplier is missing. Supplier
signatures (slots are 1-based):

    dL(slot, *pts)          -> (n,)      gradient of the Lagrangian
    dPhi(slot, *pts)        -> (m, n)    Jacobian of the constraints
    d2L(i, j, *pts)         -> (n, n)    mixed second partials
    d2Phi(i, j, *pts)       -> (m, n, n)
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.services import numdiff
from src.utils.exceptions import ContractError


@dataclass(frozen=True)
class _SlottedProblem:
    n: int
    m: int
    L: SlottedScalarFn
    Phi: SlottedVectorFn
    dL: Optional[Callable[..., np.ndarray]] = None
    dPhi: Optional[Callable[..., np.ndarray]] = None
    d2L: Optional[Callable[..., np.ndarray]] = None
    d2Phi: Optional[Callable[..., np.ndarray]] = None

    _arity = 0

    def __post_init__(self):
        if self.L.arity != self._arity or self.Phi.arity != self._arity:
            raise ContractError(f"{type(self).__name__} needs functions of arity {self._arity}")
        if self.L.dim != self.n or self.Phi.dim != self.n:
            raise ContractError(f"function dimension does not match n={self.n}")
        if self.Phi.out_dim != self.m:
            raise ContractError(f"constraint output length {self.Phi.out_dim} differs from m={self.m}")
        if not 0 <= self.m <= self.n:
            raise ContractError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")

    def check_shapes(self, points: Sequence[np.ndarray], lams: Sequence[np.ndarray] = ()) -> None:
        for q in points:
            if np.shape(q) != (self.n,):
                raise ContractError(f"configuration point shape {np.shape(q)}, expected ({self.n},)")
        for lam in lams:
            if np.shape(lam) != (self.m,):
                raise ContractError(f"multiplier shape {np.shape(lam)}, expected ({self.m},)")

    def grad_L(self, slot: int, pts, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        if self.dL is not None:
            return np.asarray(self.dL(slot, *pts), dtype=float)
        return numdiff.fd_partial(self.L, slot, pts, settings)

    def jac_Phi(self, slot: int, pts, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        if self.m == 0:
            return np.zeros((0, self.n))
        if self.dPhi is not None:
            return np.asarray(self.dPhi(slot, *pts), dtype=float).reshape(self.m, self.n)
        return numdiff.fd_slot_jacobian(self.Phi, slot, pts, settings)

    # second-derivative suppliers may return None for slot pairs they do not cover
    def mixed_L(self, i: int, j: int, pts, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        if self.d2L is not None:
            value = self.d2L(i, j, *pts)
            if value is not None:
                return np.asarray(value, dtype=float)
        return numdiff.fd_mixed_second(self.L, i, j, pts, settings)

    def mixed_Phi(self, i: int, j: int, pts, settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
        if self.m == 0:
            return np.zeros((0, self.n, self.n))
        if self.d2Phi is not None:
            value = self.d2Phi(i, j, *pts)
            if value is not None:
                return np.asarray(value, dtype=float).reshape(self.m, self.n, self.n)
        return numdiff.fd_mixed_second_vector(self.Phi, i, j, pts, settings)

    def scaled(self, cost_factor: float, constraint_factor: float):
        """The same problem with L multiplied by ``cost_factor`` and Phi by ``constraint_factor``.

        Solutions are unchanged; multipliers of the scaled problem are
        ``cost_factor / constraint_factor`` times the original ones.
        """
        if not (cost_factor > 0 and constraint_factor > 0):
            raise ContractError("scale factors must be positive")
        a, b = float(cost_factor), float(constraint_factor)

        def times(factor, supplier):
            if supplier is None:
                return None

            def wrapped(*args):
                value = supplier(*args)
                return None if value is None else factor * np.asarray(value, dtype=float)
            return wrapped

        L, Phi = self.L, self.Phi
        return replace(
            self,
            L=SlottedScalarFn(L.arity, L.dim, lambda *pts: a * L(*pts)),
            Phi=SlottedVectorFn(Phi.arity, Phi.dim, Phi.out_dim, lambda *pts: b * Phi(*pts)),
            dL=times(a, self.dL), dPhi=times(b, self.dPhi),
            d2L=times(a, self.d2L), d2Phi=times(b, self.d2Phi),
        )


@dataclass(frozen=True)
class VakonomicProblem1(_SlottedProblem):
    """First-order problem: L_d and Phi_d on Q x Q."""

    _arity = 2

    @property
    def Ld(self) -> SlottedScalarFn:
        return self.L

    @property
    def Phid(self) -> SlottedVectorFn:
        return self.Phi


@dataclass(frozen=True)
class VakonomicProblem2(_SlottedProblem):
    """Second-order problem: a Lagrangian and m constraints on Q x Q x Q."""

    _arity = 3

    @property
    def Ltilded(self) -> SlottedScalarFn:
        return self.L

    @property
    def Phid(self) -> SlottedVectorFn:
        return self.Phi
