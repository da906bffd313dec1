"""
Experiment runners behind the command-line interface.

Each runner takes a validated ``ExperimentConfig``, performs one run mode
(flow, bvp, oracle, energy, convergence, check), writes its CSV table,
optional SVG plot and ``summary.txt`` below ``config.output_dir`` and
returns a ``RunResult`` whose summary the CLI prints as ``key: value`` lines.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.models.core import DiscretePath, MultiplierSeq, config_point, multiplier
from src.models.problems import VakonomicProblem2
from src.repositories.plots import PlotRepository
from src.repositories.trajectories import SummaryRepository, TrajectoryRepository, trajectory_frame
from src.schemas.cartpole import CartPoleParams
from src.schemas.experiment import ExperimentConfig
from src.schemas.settings import SolverSettings
from src.services import energy
from src.services.cartpole import (
    ReducedState, cp_discrete_Ld_grad, cp_discrete_Phi, cp_discrete_system, cp_multiplier_factor,
    cp_R, derivative_registry, derivative_samples, rk4_integrate,
)
from src.services.newton import relative_determinant
from src.services.numdiff import check_derivatives
from src.services.ocp_reduce import ControlledDiscreteSystem, recover_controls, shoot_bvp, total_cost
from src.services.oracle import default_guess, perturbation_check, solve_direct, solve_direct_homotopy
from src.services.toy_problems import biharmonic_toy
from src.services.vak2 import flow2, kkt2, project_seed, residual2
from src.utils.exceptions import CheckFailure, ConfigError, ContractError, VakonomicError

logger = logging.getLogger(__name__)

REFERENCE_SUBSTEPS = 100
DERIVATIVE_TOL = 1e-6
IDENTITY_TOL = 1e-12
CROSS_FORMULA_TOL = 1e-10
CHECK_SAMPLES = 100

RECONSTRUCTION_NOTE = ("velocities by central differences, accelerations by second differences, "
                       "p1theta = -m l cos(theta) u + s lambda / h^2")


@dataclass
class RunResult:
    mode: str
    summary: Dict[str, Any]
    files: List[Path] = field(default_factory=list)


@dataclass(frozen=True)
class ModelBundle:
    """The reduced problem of a run and, for the cart-pole, its controlled system."""

    problem: VakonomicProblem2
    system: Optional[ControlledDiscreteSystem] = None
    params: Optional[CartPoleParams] = None

    @property
    def is_cartpole(self) -> bool:
        return self.system is not None


def build_model(config: ExperimentConfig, h: Optional[float] = None) -> ModelBundle:
    h = config.h if h is None else h
    if config.model == "biharmonic":
        return ModelBundle(biharmonic_toy(2))
    params = config.params()
    system, problem = cp_discrete_system(params, h)
    return ModelBundle(problem, system, params)


def _vectors(config: ExperimentConfig, p: VakonomicProblem2, q_keys: Sequence[str],
             lam_keys: Sequence[str] = ()) -> List[np.ndarray]:
    try:
        values = [config_point(getattr(config, k), p.n) for k in q_keys]
        for k in lam_keys:
            raw = getattr(config, k)
            values.append(np.zeros(p.m) if raw is None else multiplier(raw, p.m))
    except ContractError as exc:
        raise ConfigError(f"bad {config.model} data: {exc}") from exc
    return values


def _flow_from_seed(config: ExperimentConfig, model: ModelBundle,
                    settings: SolverSettings) -> Tuple[DiscretePath, MultiplierSeq]:
    p = model.problem
    q0, q1, q2, q3, lam0, lam1 = _vectors(config, p, ("q0", "q1", "q2", "q3"), ("lam0", "lam1"))
    if config.project_seed:
        q2, q3 = project_seed(p, q0, q1, q2, q3, settings)
    return flow2(p, q0, q1, q2, q3, lam0, lam1, config.N, settings, h=config.h)


def residual_columns(p: VakonomicProblem2, path: DiscretePath, lams: MultiplierSeq,
                     settings: SolverSettings) -> Tuple[np.ndarray, np.ndarray]:
    """Per-node stationarity (k = 2 .. N-2) and constraint (k = 0 .. N-2) residuals."""
    N, pts = path.N, path.points
    res_stat = np.full(N + 1, np.nan)
    res_con = np.full(N + 1, np.nan)
    for k in range(2, N - 1):
        r = residual2(p, *pts[k - 2:k + 3], lams[k - 2], lams[k - 1], lams[k], settings)
        res_stat[k] = float(np.max(np.abs(r[:p.n])))
    for k in range(N - 1):
        res_con[k] = float(np.max(np.abs(p.Phi(pts[k], pts[k + 1], pts[k + 2])), initial=0.0))
    return res_stat, res_con


def _trajectory(model: ModelBundle, path: DiscretePath, lams: MultiplierSeq, settings: SolverSettings,
                scale: Optional[float] = None) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    p, N = model.problem, path.N
    nan = np.full(N + 1, np.nan)
    u, lam, H = nan.copy(), nan.copy(), nan.copy()
    if p.m:
        lam[:len(lams)] = lams.lams[:, 0]

    stats: Dict[str, Any] = {}
    if model.is_cartpole:
        controls = recover_controls(model.system, path, settings)
        u[1:N] = controls.u[:, 0]
        H = energy.energy_series(model.params, path, lams, controls, scale)
        stats["total_cost"] = total_cost(model.system, path, settings)
    else:
        pts = path.points
        stats["action"] = float(sum(p.L(pts[k], pts[k + 1], pts[k + 2]) for k in range(N - 1)))

    res_stat, res_con = residual_columns(p, path, lams, settings)
    stats["max_res_stat"] = float(np.nanmax(res_stat))
    stats["max_res_con"] = float(np.nanmax(res_con))
    frame = trajectory_frame(path.times, path.points[:, 0], path.points[:, 1], u, lam, H, res_stat, res_con)
    return frame, stats


def _write(config: ExperimentConfig, name: str, frame: pd.DataFrame, summary: Dict[str, Any],
           plots: Sequence[Tuple[str, Callable[[PlotRepository], Path]]] = ()) -> List[Path]:
    files = [TrajectoryRepository(config.output_dir).save(name, frame)]
    if config.plot:
        repo = PlotRepository(config.output_dir)
        files.extend(draw(repo) for _, draw in plots)
    summary["files"] = ",".join(f.name for f in files)
    files.append(SummaryRepository(config.output_dir).save(summary))
    return files


def _trajectory_plot(name: str, frame: pd.DataFrame) -> Tuple[str, Callable[[PlotRepository], Path]]:
    return name, lambda repo: repo.save_line_plot(
        name, frame["t"], {"x": frame["x"], "theta": frame["theta"]}, "t [s]", "configuration")


def _base_summary(mode: str, config: ExperimentConfig) -> Dict[str, Any]:
    return {"mode": mode, "model": config.model, "N": config.N, "h": config.h}


def _finish_path_run(mode: str, config: ExperimentConfig, model: ModelBundle, path: DiscretePath,
                     lams: MultiplierSeq, settings: SolverSettings, started: float,
                     extra: Optional[Dict[str, Any]] = None) -> RunResult:
    frame, stats = _trajectory(model, path, lams, settings)
    summary = {**_base_summary(mode, config), **stats, **(extra or {})}
    if model.is_cartpole:
        summary["multiplier_scale"] = energy.predicted_scale(model.params)
        summary["reconstruction"] = RECONSTRUCTION_NOTE
    summary["runtime_s"] = time.perf_counter() - started
    files = _write(config, mode, frame, summary, [_trajectory_plot(f"{mode}_trajectory", frame)])
    logger.info(f"{mode} run finished in {summary['runtime_s']:.3f} s")
    return RunResult(mode, summary, files)


def run_flow(config: ExperimentConfig) -> RunResult:
    """Run the second-order flow from the configured seed."""
    config.require_mode("flow")
    started = time.perf_counter()
    settings = config.settings()
    model = build_model(config)
    path, lams = _flow_from_seed(config, model, settings)
    return _finish_path_run("flow", config, model, path, lams, settings, started,
                            {"seed_projected": config.project_seed})


def _boundary(config: ExperimentConfig, p: VakonomicProblem2) -> Tuple[np.ndarray, ...]:
    return tuple(_vectors(config, p, ("q0", "q1", "qNm1", "qN")))


def run_bvp(config: ExperimentConfig) -> RunResult:
    """Solve the boundary problem by single shooting.

    The shooting guess interpolates linearly between q1 and q_{N-1} and is
    projected onto the seed constraints before the first shot.
    """
    config.require_mode("bvp")
    started = time.perf_counter()
    settings = config.settings()
    model = build_model(config)
    p, N = model.problem, config.N
    q0, q1, qNm1, qN = _boundary(config, p)

    interpolated = [q0, q1, *default_guess((q0, q1, qNm1, qN), N, p.m).interior, qNm1, qN]
    g2, g3 = project_seed(p, q0, q1, interpolated[2], interpolated[3], settings)
    guess = (g2, g3, np.zeros(p.m), np.zeros(p.m))
    path, lams = shoot_bvp(p, q0, q1, qNm1, qN, guess, N, settings, h=config.h)
    return _finish_path_run("bvp", config, model, path, lams, settings, started)


def _flow_reproduction(p: VakonomicProblem2, path: DiscretePath, lams: MultiplierSeq,
                       settings: SolverSettings) -> float:
    """Largest deviation of flow2, seeded from the first window, from ``path``."""
    try:
        replay, _ = flow2(p, *path.points[:4], lams[0], lams[1], path.N, settings, h=path.h)
    except VakonomicError as exc:
        logger.warning(f"flow replay of the oracle solution failed: {exc}")
        return float("nan")
    return float(np.max(np.abs(replay.points - path.points)))


def run_oracle(config: ExperimentConfig) -> RunResult:
    """Solve the boundary problem by direct transcription."""
    config.require_mode("oracle")
    started = time.perf_counter()
    settings = config.settings()
    model = build_model(config)
    p, N = model.problem, config.N
    boundary = _boundary(config, p)

    if config.homotopy_stages > 1:
        path, lams, stats = solve_direct_homotopy(p, boundary, N, config.homotopy_stages, settings, h=config.h)
    else:
        path, lams, stats = solve_direct(p, boundary, N, settings=settings, h=config.h)

    extra: Dict[str, Any] = {
        "iterations": stats.iterations,
        "kkt_residual": stats.residual,
        "homotopy_stages": config.homotopy_stages,
        "flow_reproduction": _flow_reproduction(p, path, lams, settings),
    }
    if config.perturbation_samples and model.is_cartpole:
        extra["min_cost_gap"] = perturbation_check(model.system, p, path, config.perturbation_samples,
                                                   settings=settings)
    return _finish_path_run("oracle", config, model, path, lams, settings, started, extra)


def run_energy_study(config: ExperimentConfig) -> RunResult:
    """Reconstruct and plot the energy series of a cart-pole flow."""
    config.require_mode("energy")
    if config.model != "cartpole":
        raise ConfigError("the energy study needs the cart-pole model")
    started = time.perf_counter()
    settings = config.settings()
    model = build_model(config)
    path, lams = _flow_from_seed(config, model, settings)

    controls = recover_controls(model.system, path, settings)
    fit = energy.calibrate_scale(model.params, path, lams, controls)
    frame, stats = _trajectory(model, path, lams, settings, scale=fit.fitted)
    band = energy.band_report(frame["H"].to_numpy(), window=config.window)
    defined = frame["H"].dropna()

    summary = {
        **_base_summary("energy", config), **stats,
        "seed_projected": config.project_seed,
        "multiplier_scale_predicted": fit.predicted,
        "multiplier_scale_fitted": fit.fitted,
        "scale_fit_samples": fit.samples,
        "H_first": float(defined.iloc[0]),
        "H_band_amplitude": band.amplitude,
        "H_max_deviation": band.max_deviation,
        "H_trend": band.trend,
        "H_band_passed": band.passed,
        "reconstruction": RECONSTRUCTION_NOTE + " (fitted s)",
        "runtime_s": time.perf_counter() - started,
    }
    plots = [("energy", lambda repo: repo.save_line_plot(
        "energy", frame["k"], {"H": frame["H"]}, "step k", "H", "Reconstructed energy"))]
    files = _write(config, "energy", frame, summary, plots)
    logger.info(f"energy study: amplitude {band.amplitude:.3e}, max deviation {band.max_deviation:.3e}")
    return RunResult("energy", summary, files)


def steps_for(t_final: float, h: float) -> int:
    """Number of steps N = t_final / h; ``h`` must divide ``t_final``."""
    ratio = t_final / h
    N = int(round(ratio))
    if abs(ratio - N) > 1e-9 * max(ratio, 1.0):
        raise ConfigError(f"step size {h} does not divide the final time {t_final}")
    if N < 4:
        raise ConfigError(f"step size {h} gives N={N}; at least 4 steps are needed")
    return N


def _cubic_error(config: ExperimentConfig, model: ModelBundle, h: float, N: int,
                 settings: SolverSettings) -> float:
    q0, v, a, j = np.asarray(config.state, dtype=float).reshape(4, 2)
    t = np.arange(N + 1)[:, None] * h
    exact = q0 + v * t + a * t ** 2 / 2.0 + j * t ** 3 / 6.0
    empty = np.zeros(0)
    path, _ = flow2(model.problem, *exact[:4], empty, empty, N, settings, h=h)
    return float(np.max(np.abs(path.points - exact)))


def _cartpole_error(config: ExperimentConfig, model: ModelBundle, h: float, N: int,
                    settings: SolverSettings) -> float:
    start = ReducedState.from_array(config.state)
    q0, q1, q2, q3, lam0, lam1 = energy.state_to_seed(model.params, start, h, REFERENCE_SUBSTEPS)
    q2, q3 = project_seed(model.problem, q0, q1, q2, q3, settings)
    path, _ = flow2(model.problem, q0, q1, q2, q3, lam0, lam1, N, settings, h=h)
    reference = rk4_integrate(model.params, start, h / REFERENCE_SUBSTEPS, N * REFERENCE_SUBSTEPS)
    exact = np.array([[s.x, s.theta] for s in reference[::REFERENCE_SUBSTEPS]])
    return float(np.max(np.abs(path.points - exact)))


def observed_orders(h_list: Sequence[float], errors: Sequence[float]) -> List[float]:
    """log(e_{i-1} / e_i) / log(h_{i-1} / h_i); NaN for the first entry or zero errors."""
    orders = [float("nan")]
    for i in range(1, len(errors)):
        if errors[i] > 0 and errors[i - 1] > 0:
            orders.append(float(np.log(errors[i - 1] / errors[i]) / np.log(h_list[i - 1] / h_list[i])))
        else:
            orders.append(float("nan"))
    return orders


def run_convergence(config: ExperimentConfig) -> RunResult:
    """Compare flow2 against a continuous reference over a list of step sizes."""
    config.require_mode("convergence")
    started = time.perf_counter()
    settings = config.settings()
    h_list = [float(h) for h in config.h_list]
    steps = [steps_for(config.t_final, h) for h in h_list]
    measure = _cubic_error if config.model == "biharmonic" else _cartpole_error

    errors = []
    for h, N in zip(h_list, steps):
        error = measure(config, build_model(config, h), h, N, settings)
        logger.info(f"convergence: h={h:g}, N={N}, max position error {error:.3e}")
        errors.append(error)

    table = pd.DataFrame({"h": h_list, "N": steps, "max_error": errors,
                          "order": observed_orders(h_list, errors)})
    summary = {
        "mode": "convergence", "model": config.model, "t_final": config.t_final,
        "h_list": ",".join(f"{h:g}" for h in h_list),
        "max_errors": ",".join(f"{e:.6e}" for e in errors),
        "errors_decreasing": bool(all(b < a for a, b in zip(errors, errors[1:]))),
        "runtime_s": time.perf_counter() - started,
    }
    plots = [("convergence", lambda repo: repo.save_line_plot(
        "convergence", np.log2(h_list), {"log2 max error": np.log2(np.maximum(errors, 1e-300))},
        "log2 h", "log2 max error"))]
    files = _write(config, "convergence", table, summary, plots)
    return RunResult("convergence", summary, files)


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    value: float
    threshold: float
    passed: bool


def _physical_triples(rng: np.random.Generator, h: float, count: int) -> List[Tuple[np.ndarray, ...]]:
    """Triples (q_{k-1}, q_k, q_{k+1}) with bounded positions and velocities."""
    triples = []
    for _ in range(count):
        y = rng.uniform([-0.5, -1.0], [0.5, 1.0])
        v_back, v_fwd = rng.uniform(-1.0, 1.0, size=(2, 2))
        triples.append((y - h * v_back, y, y + h * v_fwd))
    return triples


def _derivative_checks(params: CartPoleParams, h: float, corrupt: Optional[str],
                       settings: SolverSettings) -> List[CheckOutcome]:
    registry = derivative_registry(params, h)
    if corrupt is not None and corrupt not in registry:
        raise ConfigError(f"unknown derivative '{corrupt}'; known: {', '.join(sorted(registry))}")

    outcomes = []
    for i, (name, (analytic, fn, slot)) in enumerate(sorted(registry.items())):
        if name == corrupt:
            logger.warning(f"corrupting analytic derivative {name}")
            analytic = (lambda f: lambda *a: 1.01 * np.asarray(f(*a)) + 1e-3)(analytic)
        err = check_derivatives(analytic, fn, slot, derivative_samples(name, CHECK_SAMPLES, seed=i), settings)
        outcomes.append(CheckOutcome(f"derivative {name}", err, DERIVATIVE_TOL, err <= DERIVATIVE_TOL))
    return outcomes


def _identity_checks(params: CartPoleParams, h: float, settings: SolverSettings) -> List[CheckOutcome]:
    outcomes = []
    grid = np.linspace(-np.pi, np.pi, 721)
    R = np.array([cp_R(params, th) for th in grid])
    expected = ((params.M + params.m) - params.m * np.cos(grid) ** 2) ** 2
    err = float(np.max(np.abs(R - expected)))
    outcomes.append(CheckOutcome("regularity identity", err, IDENTITY_TOL, err <= IDENTITY_TOL))
    gap = abs(float(np.min(R)) - params.M ** 2) / params.M ** 2
    outcomes.append(CheckOutcome("regularity minimum M^2", gap, IDENTITY_TOL,
                                 gap <= IDENTITY_TOL and float(np.min(R)) > 0))

    rng = np.random.default_rng(0)
    worst = 0.0
    for x, y, z in _physical_triples(rng, h, CHECK_SAMPLES):
        lhs = cp_discrete_Phi(params, h, x, y, z)
        rhs = h ** 2 * (cp_discrete_Ld_grad(params, h, 2, x, y)[1] + cp_discrete_Ld_grad(params, h, 1, y, z)[1])
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    outcomes.append(CheckOutcome("constraint = h^2 x Euler-Lagrange", worst, CROSS_FORMULA_TOL,
                                 worst <= CROSS_FORMULA_TOL))

    _, problem = cp_discrete_system(params, h)
    smallest = np.inf
    for x, y, z in _physical_triples(rng, h, CHECK_SAMPLES):
        lam = rng.uniform(-1.0, 1.0, size=problem.m) * cp_multiplier_factor(h)
        smallest = min(smallest, relative_determinant(kkt2(problem, x, y, z, lam, settings)[0])[1])
    outcomes.append(CheckOutcome("kkt2 regular", float(smallest), settings.singular_tol,
                                 smallest > settings.singular_tol))
    return outcomes


def run_check(config: ExperimentConfig) -> RunResult:
    """Derivative gates, constraint identities and regularity of the cart-pole model.

    Raises:
        CheckFailure: naming the failing checks, after the report is written
    """
    config.require_mode("check")
    started = time.perf_counter()
    settings = config.settings()
    params = config.params()
    outcomes = (_derivative_checks(params, config.h, config.corrupt, settings)
                + _identity_checks(params, config.h, settings))

    table = pd.DataFrame([vars(o) for o in outcomes])
    failed = [o.name for o in outcomes if not o.passed]
    summary = {
        "mode": "check", "h": config.h, "checks": len(outcomes),
        "passed": len(outcomes) - len(failed),
        "failed": ",".join(failed) if failed else "none",
        "runtime_s": time.perf_counter() - started,
    }
    files = _write(config.model_copy(update={"plot": False}), "check", table, summary)
    for o in outcomes:
        logger.debug(f"check {o.name}: {o.value:.3e} (threshold {o.threshold:.1e}) {'ok' if o.passed else 'FAILED'}")
    if failed:
        raise CheckFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}", check=failed[0])
    logger.info(f"all {len(outcomes)} checks passed")
    return RunResult("check", summary, files)


RUNNERS: Dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "flow": run_flow,
    "bvp": run_bvp,
    "oracle": run_oracle,
    "energy": run_energy_study,
    "convergence": run_convergence,
    "check": run_check,
}
