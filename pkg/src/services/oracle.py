"""
Direct-transcription oracle for the second-order boundary problem.

With q_0, q_1, q_{N-1}, q_N fixed, the unknowns are the interior points
q_2 .. q_{N-2} and all multipliers lambda^0 .. lambda^{N-2}. The equations
are the stationarity conditions at nodes 2 .. N-2 and every constraint
triple Phi(q_k, q_{k+1}, q_{k+2}), k = 0 .. N-2. The whole KKT system is
solved at once by damped Newton with a finite-difference Jacobian that only
re-evaluates the rows a perturbed unknown touches.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as LA

from src.models.core import DiscretePath, MultiplierSeq, config_point
from src.models.problems import VakonomicProblem2
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.services.newton import damped_newton
from src.services.numdiff import snapped_step
from src.services.ocp_reduce import ControlledDiscreteSystem, total_cost
from src.utils.exceptions import ContractError, NoConvergence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalVars:
    """Interior points (N-3, n) and multipliers (N-1, m) of a boundary problem."""

    interior: np.ndarray
    lams: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "interior", np.atleast_2d(np.asarray(self.interior, dtype=float)))
        lams = np.asarray(self.lams, dtype=float)
        object.__setattr__(self, "lams", lams.reshape(lams.shape[0], -1) if lams.ndim != 2 else lams)

    def stack(self) -> np.ndarray:
        return np.concatenate([self.interior.reshape(-1), self.lams.reshape(-1)])

    @classmethod
    def from_stacked(cls, z: np.ndarray, N: int, n: int, m: int) -> "GlobalVars":
        z = np.asarray(z, dtype=float)
        expected = (N - 3) * n + (N - 1) * m
        if z.shape[0] != expected:
            raise ContractError(f"stacked vector has length {z.shape[0]}, expected {expected}")
        split = (N - 3) * n
        return cls(z[:split].reshape(N - 3, n), z[split:].reshape(N - 1, m))


@dataclass(frozen=True)
class OracleStats:
    iterations: int
    residual: float


def _check_N(N: int) -> None:
    if N < 4:
        raise ContractError(f"the boundary problem needs N >= 4, got {N}")


def _full_path(boundary: Sequence[np.ndarray], interior: np.ndarray) -> List[np.ndarray]:
    q0, q1, qNm1, qN = boundary
    return [np.asarray(q0, dtype=float), np.asarray(q1, dtype=float), *interior,
            np.asarray(qNm1, dtype=float), np.asarray(qN, dtype=float)]


def _stat_row(p: VakonomicProblem2, pts, lams, k: int, settings) -> np.ndarray:
    older, middle, newest = (pts[k - 2], pts[k - 1], pts[k]), (pts[k - 1], pts[k], pts[k + 1]), (pts[k], pts[k + 1], pts[k + 2])
    return (p.grad_L(3, older, settings) + p.grad_L(2, middle, settings) + p.grad_L(1, newest, settings)
            + p.jac_Phi(3, older, settings).T @ lams[k - 2]
            + p.jac_Phi(2, middle, settings).T @ lams[k - 1]
            + p.jac_Phi(1, newest, settings).T @ lams[k])


def _con_row(p: VakonomicProblem2, pts, k: int) -> np.ndarray:
    return p.Phi(pts[k], pts[k + 1], pts[k + 2])


def _assemble(p: VakonomicProblem2, pts, lams, N: int, settings) -> np.ndarray:
    stat = [_stat_row(p, pts, lams, k, settings) for k in range(2, N - 1)]
    con = [_con_row(p, pts, k) for k in range(0, N - 1)]
    return np.concatenate(stat + con)


def global_residual(p: VakonomicProblem2, boundary: Sequence[np.ndarray], vars: GlobalVars, N: int,
                    settings: SolverSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Stationarity rows for k = 2 .. N-2, then constraint rows for k = 0 .. N-2."""
    _check_N(N)
    if vars.interior.shape != (N - 3, p.n) or vars.lams.shape != (N - 1, p.m):
        raise ContractError(f"global variables of shape {vars.interior.shape}/{vars.lams.shape} "
                            f"do not match N={N}, n={p.n}, m={p.m}")
    p.check_shapes(boundary)
    pts = _full_path(boundary, vars.interior)
    return _assemble(p, pts, list(vars.lams), N, settings)


def _banded_jacobian(p: VakonomicProblem2, boundary, z: np.ndarray, N: int, settings) -> np.ndarray:
    n, m = p.n, p.m
    size = z.shape[0]
    n_stat = (N - 3) * n
    J = np.zeros((size, size))

    def rows(pts, lams, stat_ks, con_ks):
        parts = [_stat_row(p, pts, lams, k, settings) for k in stat_ks]
        parts += [_con_row(p, pts, k) for k in con_ks]
        return np.concatenate(parts) if parts else np.zeros(0)

    def row_index(stat_ks, con_ks):
        idx = [np.arange((k - 2) * n, (k - 1) * n) for k in stat_ks]
        idx += [np.arange(n_stat + k * m, n_stat + (k + 1) * m) for k in con_ks]
        return np.concatenate(idx) if idx else np.zeros(0, dtype=int)

    for col in range(size):
        if col < n_stat:
            j = col // n + 2
            stat_ks = range(max(2, j - 2), min(N - 2, j + 2) + 1)
            con_ks = range(max(0, j - 2), min(N - 2, j) + 1)
        else:
            j = (col - n_stat) // m
            stat_ks = range(max(2, j), min(N - 2, j + 2) + 1)
            con_ks = range(0)
        idx = row_index(stat_ks, con_ks)
        if idx.size == 0:
            continue
        step = snapped_step(z[col], settings.fd_step_first)
        values = []
        for delta in (step, -step):
            zz = z.copy()
            zz[col] += delta
            shifted = GlobalVars.from_stacked(zz, N, n, m)
            values.append(rows(_full_path(boundary, shifted.interior), list(shifted.lams), stat_ks, con_ks))
        J[idx, col] = (values[0] - values[1]) / (2.0 * step)
    return J


def default_guess(boundary: Sequence[np.ndarray], N: int, m: int) -> GlobalVars:
    """Linear interpolation between q_1 and q_{N-1}; zero multipliers."""
    _check_N(N)
    q1, qNm1 = np.asarray(boundary[1], dtype=float), np.asarray(boundary[2], dtype=float)
    weights = (np.arange(2, N - 1) - 1.0) / (N - 2.0)
    interior = q1 + weights[:, None] * (qNm1 - q1)
    return GlobalVars(interior, np.zeros((N - 1, m)))


def solve_direct(p: VakonomicProblem2, boundary: Sequence[np.ndarray], N: int,
                 guess: Optional[GlobalVars] = None,
                 settings: SolverSettings = DEFAULT_SETTINGS,
                 h: float = 1.0) -> Tuple[DiscretePath, MultiplierSeq, OracleStats]:
    """Solve the full boundary-value KKT system by damped Newton."""
    _check_N(N)
    boundary = tuple(config_point(q, p.n) for q in boundary)
    if len(boundary) != 4:
        raise ContractError("boundary data is (q0, q1, q_{N-1}, q_N)")
    guess = default_guess(boundary, N, p.m) if guess is None else guess
    z0 = guess.stack()
    n, m = p.n, p.m

    def residual(z):
        v = GlobalVars.from_stacked(z, N, n, m)
        return _assemble(p, _full_path(boundary, v.interior), list(v.lams), N, settings)

    def jacobian(z):
        return _banded_jacobian(p, boundary, z, N, settings)

    result = damped_newton(residual, jacobian, z0, settings, by_pivot=True, label="oracle")
    solution = GlobalVars.from_stacked(result.x, N, n, m)
    logger.info(f"oracle converged: N={N}, iterations={result.iterations}, |F|={result.residual:.3e}")
    path = DiscretePath(_full_path(boundary, solution.interior), h)
    return path, MultiplierSeq(list(solution.lams), m), OracleStats(result.iterations, result.residual)


def solve_direct_homotopy(p: VakonomicProblem2, boundary: Sequence[np.ndarray], N: int,
                          stages: int = 5,
                          settings: SolverSettings = DEFAULT_SETTINGS,
                          h: float = 1.0) -> Tuple[DiscretePath, MultiplierSeq, OracleStats]:
    """Continuation in the boundary gap.

    The terminal pair moves linearly from (q0, q1) to the requested
    (q_{N-1}, q_N) over ``stages`` solves, each warm-started from the last.
    """
    if stages < 1:
        raise ContractError(f"homotopy needs at least one stage, got {stages}")
    q0, q1, qNm1, qN = (np.asarray(q, dtype=float) for q in boundary)
    guess = None
    total_iterations = 0
    for s in np.linspace(1.0 / stages, 1.0, stages):
        stage_boundary = (q0, q1, q0 + s * (qNm1 - q0), q1 + s * (qN - q1))
        path, lams, stats = solve_direct(p, stage_boundary, N, guess, settings, h)
        total_iterations += stats.iterations
        guess = GlobalVars(path.points[2:N - 1], lams.lams)
        logger.debug(f"homotopy stage s={s:.3f}: {stats.iterations} iterations")
    return path, lams, OracleStats(total_iterations, stats.residual)


def project_path(p: VakonomicProblem2, path: DiscretePath,
                 settings: SolverSettings = DEFAULT_SETTINGS) -> DiscretePath:
    """Minimum-norm projection of the interior points onto all constraint triples.

    The four boundary points stay fixed.
    """
    N = path.N
    _check_N(N)
    n, m = p.n, p.m
    pts = [np.array(q, dtype=float) for q in path.points]
    if m == 0:
        return path

    for _ in range(settings.max_iter):
        c = np.concatenate([_con_row(p, pts, k) for k in range(N - 1)])
        norm = float(np.max(np.abs(c)))
        if norm <= settings.newton_tol:
            break
        J = np.zeros(((N - 1) * m, (N - 3) * n))
        for k in range(N - 1):
            triple = (pts[k], pts[k + 1], pts[k + 2])
            for slot, j in ((1, k), (2, k + 1), (3, k + 2)):
                if 2 <= j <= N - 2:
                    J[k * m:(k + 1) * m, (j - 2) * n:(j - 1) * n] = p.jac_Phi(slot, triple, settings)
        dz = -LA.lstsq(J, c)[0]
        for j in range(2, N - 1):
            pts[j] = pts[j] + dz[(j - 2) * n:(j - 1) * n]
        if np.max(np.abs(dz)) <= settings.step_tol * (1.0 + max(np.max(np.abs(q)) for q in pts)):
            break
    else:
        raise NoConvergence(f"path projection did not converge (|Phi|={norm:.3e})",
                            iterations=settings.max_iter, residual=norm)
    return DiscretePath(pts, path.h)


def perturbation_check(sys: ControlledDiscreteSystem, p: VakonomicProblem2, path: DiscretePath,
                       samples: int = 50, scale: float = 1e-3, seed: int = 0,
                       settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Smallest cost gap total_cost(perturbed) - total_cost(path) over projected perturbations.

    A non-negative result (up to round-off) is consistent with ``path`` being
    a local minimiser of the constrained discrete cost.
    """
    rng = np.random.default_rng(seed)
    base = total_cost(sys, path, settings)
    N = path.N
    gaps = []
    for _ in range(samples):
        pts = np.array(path.points, dtype=float)
        pts[2:N - 1] += scale * rng.standard_normal(pts[2:N - 1].shape)
        feasible = project_path(p, DiscretePath(pts, path.h), settings)
        gaps.append(total_cost(sys, feasible, settings) - base)
    worst = float(min(gaps))
    logger.info(f"perturbation check: {samples} samples, smallest cost gap {worst:.3e}")
    return worst
