"""
Integration tests for the cart-pole experiment pipeline: run files, and the
refinement behaviour of the reconstructed momentum and energy.
"""

import numpy as np
import pytest

from src.repositories.trajectories import TrajectoryRepository
from src.schemas.experiment import ExperimentConfig
from src.services.cartpole import ReducedState, cp_discrete_system
from src.services.energy import energy_series, pi_series, state_to_seed
from src.services.experiments import run_flow
from src.services.ocp_reduce import recover_controls
from src.services.vak2 import flow2, project_seed

SMALL_SWING = ReducedState(x=0.0, theta=np.pi - 0.2, xdot=0.0, thetadot=0.0,
                           p1theta=0.01, p1theta_dot=0.0, pi=0.01, pi_dot=0.0)


def swing_flow(params, h, N):
    """Flow of the small swing from its projected seed, with the controlled system."""
    system, problem = cp_discrete_system(params, h)
    q0, q1, q2, q3, lam0, lam1 = state_to_seed(params, SMALL_SWING, h)
    q2, q3 = project_seed(problem, q0, q1, q2, q3)
    path, lams = flow2(problem, q0, q1, q2, q3, lam0, lam1, N, h=h)
    return system, path, lams


def line_fit_residual(t, values):
    mask = np.isfinite(values)
    coeffs = np.polyfit(t[mask], values[mask], 1)
    return float(np.max(np.abs(values[mask] - np.polyval(coeffs, t[mask]))))


class TestFlowRun:
    """Tests for the files of a cart-pole flow run."""

    def test_csv_controls_add_up_to_total_cost(self, cp_params, tmp_path):
        """Test that the sum of u^2 / 2 over the written table equals the summary total_cost."""
        h = 0.01
        _, problem = cp_discrete_system(cp_params, h)
        q0, q1, q2, q3, lam0, lam1 = state_to_seed(cp_params, SMALL_SWING, h)
        q2, q3 = project_seed(problem, q0, q1, q2, q3)
        seed = {key: list(map(float, value)) for key, value in
                zip(("q0", "q1", "q2", "q3", "lam0", "lam1"), (q0, q1, q2, q3, lam0, lam1))}
        config = ExperimentConfig(N=60, h=h, output_dir=str(tmp_path), plot=False, **seed)

        result = run_flow(config)
        frame = TrajectoryRepository(tmp_path).load_trajectory("flow")
        u = frame["u"].to_numpy()
        assert np.count_nonzero(np.isfinite(u)) == 59
        assert 0.5 * float(np.nansum(u ** 2)) == pytest.approx(result.summary["total_cost"], rel=1e-12)


@pytest.mark.slow
class TestRefinement:
    """Tests for the behaviour of reconstructed quantities as h shrinks."""

    def test_pi_line_fit_is_second_order(self, cp_params):
        """Test that the line-fit residual of the reconstructed pi falls like h^2."""
        residuals = []
        for h in (0.02, 0.01, 0.005):
            N = int(round(0.5 / h))
            system, path, lams = swing_flow(cp_params, h, N)
            pi = pi_series(cp_params, path, lams, recover_controls(system, path))
            residuals.append(line_fit_residual(path.times, pi))
        assert residuals[0] > residuals[1] > residuals[2]
        assert residuals[0] / residuals[1] >= 2.8
        assert residuals[1] / residuals[2] >= 2.8

    def test_energy_amplitude_shrinks(self, cp_params):
        """Test that the spread of the reconstructed energy over one second drops when h halves."""
        amplitudes = []
        for h in (0.01, 0.005):
            N = int(round(1.0 / h))
            system, path, lams = swing_flow(cp_params, h, N)
            H = energy_series(cp_params, path, lams, recover_controls(system, path))
            amplitudes.append(float(np.nanmax(H) - np.nanmin(H)))
        assert amplitudes[1] < amplitudes[0]
