"""
Integration tests for the command-line interface.

The runs use the biharmonic toy wherever the model does not matter, so each
command finishes quickly; the cart-pole is exercised through the check suite
and the seed validation of a flow run.
"""

import numpy as np
import pandas as pd
import pytest

from src.main import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from src.repositories.trajectories import SummaryRepository, TrajectoryRepository
from src.utils.exceptions import NoConvergence


def cubic(k):
    """q_k = (0.001 k^3, 0.01 k^2) solves the biharmonic stencil for any h."""
    return 0.001 * k ** 3, 0.01 * k ** 2


def vec(point):
    return ",".join(f"{v:g}" for v in point)


def summary_lines(out):
    return {line.split(": ", 1)[0]: line.split(": ", 1)[1] for line in out.splitlines()
            if ": " in line and " - " not in line}


@pytest.fixture
def run(tmp_path):
    """Call main() with an output directory below tmp_path."""
    out_dir = tmp_path / "results"

    def invoke(*args, plot=False):
        argv = [*args, "--output_dir", str(out_dir)]
        if not plot:
            argv.append("--no-plot")
        return main(argv)
    invoke.out_dir = out_dir
    return invoke


def seed_flags(N=10):
    return ["--model", "biharmonic", "--N", str(N),
            "--q0", vec(cubic(0)), "--q1", vec(cubic(1)), "--q2", vec(cubic(2)), "--q3", vec(cubic(3))]


def boundary_flags(N=10):
    return ["--model", "biharmonic", "--N", str(N),
            "--q0", vec(cubic(0)), "--q1", vec(cubic(1)), "--qNm1", vec(cubic(N - 1)), "--qN", vec(cubic(N))]


class TestRunModes:
    """Successful runs and their files."""

    def test_flow(self, run, capsys):
        """Test that a biharmonic flow reproduces the cubic and prints its summary."""
        assert run("flow", *seed_flags()) == EXIT_OK
        summary = summary_lines(capsys.readouterr().out)
        assert summary["mode"] == "flow"
        assert summary["N"] == "10"
        assert summary["files"] == "flow.csv"

        frame = TrajectoryRepository(run.out_dir).load_trajectory("flow")
        exact = np.array([cubic(k) for k in range(11)])
        np.testing.assert_allclose(frame[["x", "theta"]].to_numpy(), exact, atol=1e-9)
        assert frame["lambda"].isna().all()
        assert SummaryRepository(run.out_dir).load()["mode"] == "flow"

    def test_flow_with_plot(self, run):
        """Test that the trajectory plot is written next to the table."""
        assert run("flow", *seed_flags(), plot=True) == EXIT_OK
        assert (run.out_dir / "flow_trajectory.svg").is_file()
        assert SummaryRepository(run.out_dir).load()["files"] == "flow.csv,flow_trajectory.svg"

    def test_bvp(self, run):
        """Test that shooting finds the cubic through the boundary data."""
        assert run("bvp", *boundary_flags()) == EXIT_OK
        frame = TrajectoryRepository(run.out_dir).load_trajectory("bvp")
        exact = np.array([cubic(k) for k in range(11)])
        np.testing.assert_allclose(frame[["x", "theta"]].to_numpy(), exact, atol=1e-6)

    def test_oracle(self, run, capsys):
        """Test that the direct solve reports its statistics."""
        assert run("oracle", *boundary_flags(8)) == EXIT_OK
        summary = summary_lines(capsys.readouterr().out)
        assert float(summary["kkt_residual"]) <= 1e-8
        assert float(summary["flow_reproduction"]) <= 1e-6
        assert summary["homotopy_stages"] == "1"

    def test_convergence(self, run):
        """Test the refinement table for an exact cubic start state."""
        state = "0,0,0.1,0.2,0.5,-0.3,1,0.4"
        assert run("convergence", "--model", "biharmonic", "--state", state) == EXIT_OK
        table = pd.read_csv(run.out_dir / "convergence.csv")
        assert list(table["N"]) == [25, 50, 100]
        assert np.all(table["max_error"] <= 1e-8)

    def test_check_passes(self, run, capsys):
        """Test that the default cart-pole model passes every check."""
        assert run("check") == EXIT_OK
        summary = summary_lines(capsys.readouterr().out)
        assert summary["failed"] == "none"
        assert summary["passed"] == summary["checks"]
        assert (run.out_dir / "check.csv").is_file()
        assert not (run.out_dir / "check.svg").exists()


class TestConfiguration:
    """Settings files and flag precedence."""

    def test_flag_overrides_config_file(self, run, tmp_path):
        """Test that --N wins over the value in --config."""
        config = tmp_path / "run.cfg"
        config.write_text("N=12\nnewton_tol=1e-11\n")
        assert run("flow", *seed_flags(10), "--config", str(config)) == EXIT_OK
        assert SummaryRepository(run.out_dir).load()["N"] == "10"

    def test_environment_settings_file(self, run, tmp_path, monkeypatch):
        """Test that VAKON_SETTINGS supplies values no flag sets."""
        settings = tmp_path / "defaults.cfg"
        settings.write_text("h=0.02\n")
        monkeypatch.setenv("VAKON_SETTINGS", str(settings))
        assert run("flow", *seed_flags()) == EXIT_OK
        assert SummaryRepository(run.out_dir).load()["h"] == "0.02"

    def test_hyphenated_alias(self, tmp_path):
        """Test --output-dir as an alias of --output_dir."""
        assert main(["flow", *seed_flags(), "--output-dir", str(tmp_path / "alias"), "--no-plot"]) == EXIT_OK
        assert (tmp_path / "alias" / "flow.csv").is_file()


class TestExitCodes:
    """Exit codes for configuration and solver failures."""

    def test_help(self, capsys):
        """Test that --help exits successfully."""
        assert main(["flow", "--help"]) == EXIT_OK
        assert "--q0" in capsys.readouterr().out

    def test_unknown_flag(self, run):
        """Test that argparse failures are configuration errors."""
        assert run("flow", "--speed", "3") == EXIT_CONFIG

    def test_missing_subcommand(self):
        """Test that a run mode is required."""
        assert main([]) == EXIT_CONFIG

    def test_invalid_value(self, run):
        """Test that a non-positive mass fails validation."""
        assert run("check", "--m", "0") == EXIT_CONFIG

    def test_missing_seed_point(self, run):
        """Test that a flow without q3 is a configuration error."""
        assert run("flow", *seed_flags()[:-2]) == EXIT_CONFIG

    def test_foreign_data(self, run):
        """Test that boundary data is refused by a flow run."""
        assert run("flow", *seed_flags(), "--qN", "1,1") == EXIT_CONFIG

    def test_bad_vector_length(self, run):
        """Test that a three-component point is a configuration error."""
        assert run("flow", *seed_flags(), "--q0", "0,0,0") == EXIT_CONFIG

    def test_single_step_size(self, run):
        """Test that a convergence study needs three step sizes."""
        assert run("convergence", "--state", "0,3,0,0,0,0,0,0", "--h_list", "0.01") == EXIT_CONFIG

    def test_energy_needs_cartpole(self, run):
        """Test that the energy study refuses the biharmonic toy."""
        assert run("energy", *seed_flags()) == EXIT_CONFIG

    def test_inconsistent_seed(self, run):
        """Test that a seed off the cart-pole constraint is a solver failure."""
        flags = ["--N", "10", "--q0", "0,0", "--q1", "0,0", "--q2", "0,0", "--q3", "0,0.1"]
        assert run("flow", *flags) == EXIT_SOLVER
        assert not (run.out_dir / "flow.csv").exists()

    def test_solver_failure(self, run, mocker):
        """Test that a Newton failure inside the flow maps to exit code 2."""
        mocker.patch("src.services.experiments.flow2", side_effect=NoConvergence("forced", iterations=3))
        assert run("flow", *seed_flags()) == EXIT_SOLVER

    def test_corrupted_derivative(self, run):
        """Test that a corrupted analytic partial fails the check and is named."""
        assert run("check", "--corrupt", "Ld.D1") == EXIT_SOLVER
        summary = SummaryRepository(run.out_dir).load()
        assert summary["failed"] == "derivative Ld.D1"
        report = pd.read_csv(run.out_dir / "check.csv")
        assert not report.loc[report["name"] == "derivative Ld.D1", "passed"].iloc[0]

    def test_unknown_corrupt_name(self, run):
        """Test that corrupting an unregistered derivative is a configuration error."""
        assert run("check", "--corrupt", "Ld.D9") == EXIT_CONFIG
