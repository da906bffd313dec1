"""
Shared domain types for discrete vakonomic problems.

Configuration points are plain read-only numpy vectors; paths and multiplier
sequences are frozen dataclasses holding read-only 2-D arrays, so every value
can be shared between threads without copying.

Angle coordinates are stored unwrapped (on the real line); every model
function is smooth in the unwrapped variable.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.exceptions import ContractError, RangeError

ConfigPoint = np.ndarray
ArrayLike = Union[Sequence[float], np.ndarray]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def config_point(coords: ArrayLike, n: Optional[int] = None) -> ConfigPoint:
    """Build a read-only configuration point, checking length and finiteness."""
    q = np.array(coords, dtype=float).reshape(-1)
    if n is not None and q.shape[0] != n:
        raise ContractError(f"configuration point has length {q.shape[0]}, expected {n}")
    if not np.all(np.isfinite(q)):
        raise ContractError(f"configuration point has non-finite entries: {q.tolist()}")
    return _frozen(q)


def multiplier(values: ArrayLike, m: Optional[int] = None) -> np.ndarray:
    """Build a read-only multiplier vector of length ``m``."""
    lam = np.array(values, dtype=float).reshape(-1)
    if m is not None and lam.shape[0] != m:
        raise ContractError(f"multiplier has length {lam.shape[0]}, expected {m}")
    return _frozen(lam)


@dataclass(frozen=True)
class DofSplit:
    """Actuated / unactuated index split of the configuration coordinates."""

    n: int
    actuated: Tuple[int, ...]
    unactuated: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "actuated", tuple(sorted(int(i) for i in self.actuated)))
        object.__setattr__(self, "unactuated", tuple(sorted(int(i) for i in self.unactuated)))


@dataclass(frozen=True)
class SplitReport:
    valid: bool
    violations: Tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


def validate_split(split: DofSplit) -> SplitReport:
    """Check the DofSplit invariants; never raises."""
    violations: List[str] = []
    act, una = set(split.actuated), set(split.unactuated)
    everything = set(range(split.n))

    overlap = act & una
    if overlap:
        violations.append(f"actuated and unactuated overlap at {sorted(overlap)}")
    outside = (act | una) - everything
    if outside:
        violations.append(f"indices {sorted(outside)} outside 0..{split.n - 1}")
    missing = everything - (act | una)
    if missing:
        violations.append(f"indices {sorted(missing)} unassigned")
    if not act:
        violations.append("no actuated coordinates")
    if not una:
        violations.append("no unactuated coordinates")
    if len(split.actuated) != len(act) or len(split.unactuated) != len(una):
        violations.append("duplicate indices")

    return SplitReport(valid=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class DiscretePath:
    """Uniformly sampled discrete path q_0 ... q_N with time step ``h``."""

    points: np.ndarray
    h: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ContractError(f"time step must be positive and finite, got {self.h}")
        rows = [np.asarray(p, dtype=float).reshape(-1) for p in self.points]
        if not rows:
            raise ContractError("a discrete path needs at least one point")
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise ContractError(f"path points have mixed dimensions {sorted(dims)}")
        arr = np.vstack(rows)
        if not np.all(np.isfinite(arr)):
            raise ContractError("path contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(arr))
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def N(self) -> int:
        """Index of the last node."""
        return self.points.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.h

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, k: int) -> ConfigPoint:
        return self.points[k]


@dataclass(frozen=True)
class MultiplierSeq:
    """Aligned Lagrange multipliers lambda^0, lambda^1, ... (each of length m)."""

    lams: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    m: int = -1

    def __post_init__(self):
        rows = [np.asarray(r, dtype=float).reshape(-1) for r in self.lams]
        m = self.m
        if rows:
            dims = {r.shape[0] for r in rows}
            if len(dims) != 1:
                raise ContractError(f"multipliers have mixed lengths {sorted(dims)}")
            width = dims.pop()
            if m >= 0 and width != m:
                raise ContractError(f"multipliers have length {width}, expected {m}")
            m = width
            arr = np.vstack(rows) if width else np.zeros((len(rows), 0))
        else:
            m = max(m, 0)
            arr = np.zeros((0, m))
        object.__setattr__(self, "lams", _frozen(arr))
        object.__setattr__(self, "m", m)

    def __len__(self) -> int:
        return self.lams.shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.lams[k]


def window(path: DiscretePath, k: int, width: int) -> Tuple[ConfigPoint, ...]:
    """Return (q_k, ..., q_{k+width-1}) as independent copies."""
    if k < 0 or width < 0 or k + width > len(path):
        raise RangeError(f"window k={k}, width={width} out of range for path of length {len(path)}")
    return tuple(config_point(path.points[i]) for i in range(k, k + width))
