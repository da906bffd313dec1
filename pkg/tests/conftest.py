"""
Pytest configuration and fixtures for testing.

This module provides shared fixtures and configuration for all tests:
solver settings, cart-pole parameters, toy problems, seeds on the free
(uncontrolled) cart-pole swing and one converged oracle solution.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root directory to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.schemas.cartpole import CartPoleParams
from src.schemas.settings import DEFAULT_SETTINGS
from src.services.cartpole import cp_discrete_system, cp_free_problem
from src.services.oracle import solve_direct
from src.services.toy_problems import biharmonic_toy, linear_constraint_toy
from src.services.vak1 import flow1

# Boundary data of the small-swing oracle scenario
ORACLE_N = 20
ORACLE_H = 0.05
ORACLE_BOUNDARY = ((0.0, 0.1), (0.0, 0.1), (0.0, 0.05), (0.0, 0.05))


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """Keep log files and developer defaults out of the tests."""
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("VAKON_SETTINGS", raising=False)
    monkeypatch.delenv("DEBUG", raising=False)


@pytest.fixture
def settings():
    return DEFAULT_SETTINGS


@pytest.fixture(scope="session")
def cp_params():
    return CartPoleParams()


@pytest.fixture
def toy1():
    """First-order toy with the linear constraint (y' - y) = 2 (x' - x)."""
    return linear_constraint_toy(2.0)


@pytest.fixture
def biharmonic():
    return biharmonic_toy(2)


@pytest.fixture
def cubic_coeffs():
    """Coefficients (a, b, c, d) of q_k = a + b k + c k^2 + d k^3 in the plane."""
    return (np.array([0.3, -0.2]), np.array([0.1, 0.05]),
            np.array([-0.02, 0.01]), np.array([0.003, -0.001]))


def _free_swing(params, h, theta0, N):
    start = np.array([0.0, theta0])
    path, _ = flow1(cp_free_problem(params, h), start, start, np.zeros(0), N, h=h)
    return path


@pytest.fixture(scope="session")
def free_swing():
    """Factory (params, h, theta0, N) -> free cart-pole path released at rest from theta0."""
    return _free_swing


@pytest.fixture(scope="session")
def free_swing_seed(cp_params):
    """Seed (q0, q1, q2, q3, lam0, lam1) of the free swing near the hanging position, h = 0.01.

    The free motion solves the reduced problem with u = 0 and zero multipliers.
    """
    path = _free_swing(cp_params, 0.01, np.pi - 0.2, 3)
    zero = np.zeros(1)
    return (*path.points[:4], zero, zero)


@pytest.fixture(scope="session")
def cp_reduced(cp_params):
    """Controlled system and reduced problem of the cart-pole at h = 0.01."""
    return cp_discrete_system(cp_params, 0.01)


@pytest.fixture(scope="session")
def oracle_solution(cp_params):
    """Converged direct-transcription solve of the small-swing boundary problem."""
    system, problem = cp_discrete_system(cp_params, ORACLE_H)
    path, lams, stats = solve_direct(problem, ORACLE_BOUNDARY, ORACLE_N, h=ORACLE_H)
    return {"system": system, "problem": problem, "path": path, "lams": lams, "stats": stats,
            "boundary": ORACLE_BOUNDARY, "N": ORACLE_N, "h": ORACLE_H}
