"""
This package contains Pydantic models for solver settings, model parameters
and experiment configuration.
"""

from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.schemas.cartpole import CartPoleParams

__all__ = ['SolverSettings', 'DEFAULT_SETTINGS', 'CartPoleParams']
