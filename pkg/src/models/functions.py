"""
Function descriptions with configuration "slots".

A slotted function takes ``arity`` configuration points of dimension ``dim``
(for example L_d(q_k, q_{k+1}) has arity 2). Slots are numbered from 1 to
match the D_1, D_2, D_3 notation of discrete mechanics.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.utils.exceptions import ContractError


@dataclass(frozen=True)
class SlottedScalarFn:
    arity: int
    dim: int
    eval: Callable[..., float]

    def __post_init__(self):
        if self.arity not in (2, 3):
            raise ContractError(f"slotted functions have arity 2 or 3, got {self.arity}")
        if self.dim < 1:
            raise ContractError(f"dimension must be positive, got {self.dim}")

    def check_point(self, point) -> None:
        if len(point) != self.arity:
            raise ContractError(f"expected {self.arity} configuration points, got {len(point)}")
        for q in point:
            if np.shape(q) != (self.dim,):
                raise ContractError(f"configuration point shape {np.shape(q)}, expected ({self.dim},)")

    def __call__(self, *points) -> float:
        return float(self.eval(*points))


@dataclass(frozen=True)
class SlottedVectorFn:
    arity: int
    dim: int
    out_dim: int
    eval: Callable[..., np.ndarray]

    def __post_init__(self):
        if self.arity not in (2, 3):
            raise ContractError(f"slotted functions have arity 2 or 3, got {self.arity}")
        if self.out_dim < 0:
            raise ContractError(f"output length must be non-negative, got {self.out_dim}")

    check_point = SlottedScalarFn.check_point

    def __call__(self, *points) -> np.ndarray:
        out = np.asarray(self.eval(*points), dtype=float).reshape(-1)
        if out.shape[0] != self.out_dim:
            raise ContractError(f"vector function returned length {out.shape[0]}, expected {self.out_dim}")
        return out

    def component(self, alpha: int) -> SlottedScalarFn:
        """The alpha-th component as a scalar slotted function."""
        return SlottedScalarFn(self.arity, self.dim, lambda *pts: self(*pts)[alpha])
