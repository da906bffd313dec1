"""
Unit tests for the direct-transcription oracle.
"""

import numpy as np
import pytest

from src.models.core import DiscretePath
from src.services.oracle import (
    GlobalVars, default_guess, global_residual, perturbation_check, project_path, solve_direct,
    solve_direct_homotopy,
)
from src.services.toy_problems import cubic_sequence
from src.services.vak2 import flow2, residual2
from src.utils.exceptions import ContractError


def cubic_boundary(coeffs, N):
    exact = cubic_sequence(coeffs, N)
    return exact, (exact[0], exact[1], exact[N - 1], exact[N])


class TestGlobalVars:
    """Tests for the stacked unknown vector."""

    def test_stack_round_trip(self):
        """Test stacking and unstacking interior points and multipliers."""
        v = GlobalVars(np.arange(6.0).reshape(3, 2), np.arange(5.0).reshape(5, 1))
        back = GlobalVars.from_stacked(v.stack(), 6, 2, 1)
        np.testing.assert_array_equal(back.interior, v.interior)
        np.testing.assert_array_equal(back.lams, v.lams)

    def test_wrong_length(self):
        """Test that a stacked vector of the wrong length is rejected."""
        with pytest.raises(ContractError):
            GlobalVars.from_stacked(np.zeros(7), 6, 2, 1)

    def test_default_guess_interpolates(self):
        """Test the linear guess between q_1 and q_{N-1}."""
        boundary = (np.zeros(2), np.zeros(2), np.array([4.0, 8.0]), np.array([5.0, 10.0]))
        guess = default_guess(boundary, 6, 1)
        np.testing.assert_allclose(guess.interior, [[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        np.testing.assert_array_equal(guess.lams, np.zeros((5, 1)))


class TestGlobalResidual:
    """Tests for global_residual."""

    def test_cubic_is_stationary(self, biharmonic, cubic_coeffs):
        """Test that a cubic makes every stationarity row vanish."""
        N = 7
        exact, boundary = cubic_boundary(cubic_coeffs, N)
        r = global_residual(biharmonic, boundary, GlobalVars(exact[2:N - 1], np.zeros((N - 1, 0))), N)
        assert r.shape == ((N - 3) * 2,)
        np.testing.assert_allclose(r, 0.0, atol=1e-12)

    def test_shape_mismatch(self, biharmonic, cubic_coeffs):
        """Test that interior points of the wrong count are rejected."""
        exact, boundary = cubic_boundary(cubic_coeffs, 7)
        with pytest.raises(ContractError):
            global_residual(biharmonic, boundary, GlobalVars(exact[2:5], np.zeros((6, 0))), 7)

    def test_horizon_too_short(self, biharmonic, cubic_coeffs):
        """Test that N = 3 is a contract error."""
        _, boundary = cubic_boundary(cubic_coeffs, 3)
        with pytest.raises(ContractError):
            global_residual(biharmonic, boundary, GlobalVars(np.zeros((0, 2)), np.zeros((2, 0))), 3)


class TestSolveDirect:
    """Tests for solve_direct and its homotopy wrapper."""

    def test_biharmonic_cubic(self, biharmonic, cubic_coeffs):
        """Test that the oracle recovers the cubic through the boundary data."""
        N = 8
        exact, boundary = cubic_boundary(cubic_coeffs, N)
        path, lams, stats = solve_direct(biharmonic, boundary, N)
        np.testing.assert_allclose(path.points, exact, atol=1e-9)
        assert len(lams) == N - 1
        assert stats.residual <= 1e-8

    def test_cartpole_kkt_residual(self, oracle_solution):
        """Test the converged cart-pole solution against residual2 at every interior node."""
        problem, path, lams = (oracle_solution[key] for key in ("problem", "path", "lams"))
        N = oracle_solution["N"]
        assert len(path) == N + 1
        assert len(lams) == N - 1
        for k in range(2, N - 1):
            r = residual2(problem, *path.points[k - 2:k + 3], lams[k - 2], lams[k - 1], lams[k])
            assert np.max(np.abs(r)) <= 1e-8
        np.testing.assert_allclose(path[N], oracle_solution["boundary"][3])

    def test_flow_reproduces_oracle(self, oracle_solution):
        """Test that flow2 seeded from the oracle follows the oracle path."""
        problem, path, lams = (oracle_solution[key] for key in ("problem", "path", "lams"))
        N = oracle_solution["N"]
        flow_path, _ = flow2(problem, *path.points[:4], lams[0], lams[1], N, h=oracle_solution["h"])
        np.testing.assert_allclose(flow_path.points, path.points, atol=1e-6)

    def test_bad_boundary(self, biharmonic):
        """Test that boundary data needs four points."""
        with pytest.raises(ContractError):
            solve_direct(biharmonic, (np.zeros(2),) * 3, 6)

    @pytest.mark.slow
    def test_homotopy_agrees(self, oracle_solution):
        """Test that continuation in the boundary gap reaches the same solution."""
        path, _, stats = solve_direct_homotopy(oracle_solution["problem"], oracle_solution["boundary"],
                                               oracle_solution["N"],
                                               stages=3, h=oracle_solution["h"])
        np.testing.assert_allclose(path.points, oracle_solution["path"].points, atol=1e-8)
        assert stats.iterations >= 3

    def test_homotopy_needs_a_stage(self, biharmonic, cubic_coeffs):
        """Test that zero stages is a contract error."""
        _, boundary = cubic_boundary(cubic_coeffs, 6)
        with pytest.raises(ContractError):
            solve_direct_homotopy(biharmonic, boundary, 6, stages=0)


class TestFeasiblePerturbations:
    """Tests for project_path and perturbation_check."""

    def test_projection_keeps_feasible_path(self, oracle_solution):
        """Test that a feasible path is left in place."""
        projected = project_path(oracle_solution["problem"], oracle_solution["path"])
        np.testing.assert_allclose(projected.points, oracle_solution["path"].points, atol=1e-12)

    def test_projection_restores_constraints(self, oracle_solution):
        """Test that a perturbed interior is moved back onto every triple."""
        problem, path, N = oracle_solution["problem"], oracle_solution["path"], oracle_solution["N"]
        pts = np.array(path.points)
        pts[2:N - 1] += 1e-3 * np.random.default_rng(5).standard_normal(pts[2:N - 1].shape)
        projected = project_path(problem, DiscretePath(pts, path.h))
        np.testing.assert_array_equal(projected.points[[0, 1, -2, -1]], path.points[[0, 1, -2, -1]])
        for k in range(N - 1):
            assert abs(problem.Phi(*projected.points[k:k + 3])[0]) <= 1e-9

    @pytest.mark.slow
    def test_oracle_cost_is_locally_minimal(self, oracle_solution):
        """Test that feasible perturbations never lower the total cost."""
        gap = perturbation_check(oracle_solution["system"], oracle_solution["problem"],
                                 oracle_solution["path"], samples=10)
        assert gap >= -1e-10
