"""
Finite-difference derivative engine for slotted functions.

Central differences are used throughout. Steps are relative to the
coordinate (``step * (1 + |x|)``) and are snapped so that ``x + step`` is
exactly representable, which makes the quotient exact (up to the rounding
of the function values) on affine functions.

Vector-valued functions are differentiated component-wise; each perturbed
evaluation is reused for all components.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.utils.exceptions import ContractError, NumericDomainError

logger = logging.getLogger(__name__)


def snapped_step(x: float, rel: float) -> float:
    step = rel * (1.0 + abs(x))
    return (x + step) - x


def _check_slot(f, slot: int, point: Sequence[np.ndarray]) -> None:
    if not 1 <= slot <= f.arity:
        raise ContractError(f"slot {slot} outside 1..{f.arity}")
    f.check_point(point)


def _evaluate(f, pts) -> np.ndarray:
    value = np.asarray(f(*pts), dtype=float)
    if not np.all(np.isfinite(value)):
        coords = np.concatenate([np.asarray(p, dtype=float) for p in pts])
        raise NumericDomainError(
            f"non-finite function value at {coords.tolist()}", coords=coords.tolist()
        )
    return value


def _shifted(point, slot: int, j: int, delta: float):
    pts = [np.array(p, dtype=float) for p in point]
    pts[slot - 1][j] += delta
    return pts


def _first_partials(f, slot: int, point, settings: SolverSettings) -> np.ndarray:
    """Central differences w.r.t. one slot; returns shape (n,) + output shape."""
    base = np.asarray(point[slot - 1], dtype=float)
    columns = []
    for j in range(base.shape[0]):
        step = snapped_step(base[j], settings.fd_step_first)
        f_plus = _evaluate(f, _shifted(point, slot, j, step))
        f_minus = _evaluate(f, _shifted(point, slot, j, -step))
        columns.append((f_plus - f_minus) / (2.0 * step))
    return np.array(columns)


def fd_partial(f: SlottedScalarFn, slot: int, point: Sequence[np.ndarray],
               settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Gradient of ``f`` with respect to configuration slot ``slot`` (1-based)."""
    _check_slot(f, slot, point)
    return _first_partials(f, slot, point, settings)


def fd_slot_jacobian(F: SlottedVectorFn, slot: int, point: Sequence[np.ndarray],
                     settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Jacobian (out_dim x n) of a vector function with respect to one slot."""
    _check_slot(F, slot, point)
    if F.out_dim == 0:
        return np.zeros((0, F.dim))
    return _first_partials(F, slot, point, settings).T


def _mixed(f, slot_i: int, slot_j: int, point, settings: SolverSettings) -> np.ndarray:
    xi = np.asarray(point[slot_i - 1], dtype=float)
    xj = np.asarray(point[slot_j - 1], dtype=float)
    blocks = np.empty((xi.shape[0], xj.shape[0]), dtype=object)
    for a in range(xi.shape[0]):
        ha = snapped_step(xi[a], settings.fd_step_second)
        for b in range(xj.shape[0]):
            hb = snapped_step(xj[b], settings.fd_step_second)
            values = []
            for sa, sb in ((ha, hb), (ha, -hb), (-ha, hb), (-ha, -hb)):
                pts = _shifted(point, slot_i, a, sa)
                pts[slot_j - 1][b] += sb
                values.append(_evaluate(f, pts))
            blocks[a, b] = (values[0] - values[1] - values[2] + values[3]) / (4.0 * ha * hb)
    return blocks


def fd_mixed_second(f: SlottedScalarFn, slot_i: int, slot_j: int, point: Sequence[np.ndarray],
                    settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Matrix of mixed partials d^2 f / d(slot_i) d(slot_j), shape (n, n)."""
    _check_slot(f, slot_i, point)
    _check_slot(f, slot_j, point)
    return _mixed(f, slot_i, slot_j, point, settings).astype(float)


def fd_mixed_second_vector(F: SlottedVectorFn, slot_i: int, slot_j: int, point: Sequence[np.ndarray],
                           settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Mixed second partials of every component, shape (out_dim, n, n)."""
    _check_slot(F, slot_i, point)
    _check_slot(F, slot_j, point)
    n = F.dim
    if F.out_dim == 0:
        return np.zeros((0, n, n))
    blocks = _mixed(F, slot_i, slot_j, point, settings)
    out = np.empty((F.out_dim, n, n))
    for a in range(n):
        for b in range(n):
            out[:, a, b] = blocks[a, b]
    return out


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
                settings: SolverSettings = DEFAULT_SETTINGS,
                f0: Optional[np.ndarray] = None) -> np.ndarray:
    """Central-difference Jacobian of a flat vector map ``fun`` at ``z``."""
    z = np.asarray(z, dtype=float)
    columns = []
    for j in range(z.shape[0]):
        step = snapped_step(z[j], settings.fd_step_first)
        zp, zm = z.copy(), z.copy()
        zp[j] += step
        zm[j] -= step
        fp = np.asarray(fun(zp), dtype=float)
        fm = np.asarray(fun(zm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericDomainError(f"non-finite value while differentiating at {z.tolist()}",
                                     coords=z.tolist())
        columns.append((fp - fm) / (2.0 * step))
    if not columns:
        size = 0 if f0 is None else np.asarray(f0).shape[0]
        return np.zeros((size, 0))
    return np.column_stack(columns)


def check_derivatives(analytic: Callable[..., np.ndarray], f: SlottedScalarFn, slot: int,
                      samples: Sequence[Tuple[np.ndarray, ...]],
                      settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Max relative disagreement between an analytic gradient and ``fd_partial``.

    The error at one sample is ||analytic - fd||_inf / (1 + ||analytic||_inf).
    """
    if len(samples) == 0:
        raise ContractError("check_derivatives needs at least one sample point")
    worst = 0.0
    for point in samples:
        exact = np.asarray(analytic(*point), dtype=float)
        approx = fd_partial(f, slot, point, settings)
        err = np.max(np.abs(exact - approx)) / (1.0 + np.max(np.abs(exact)))
        worst = max(worst, float(err))
    logger.debug(f"derivative check slot={slot} samples={len(samples)} max_err={worst:.3e}")
    return worst
