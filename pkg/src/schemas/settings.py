"""
Pydantic models for numerical solver settings.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

_EPS = float(np.finfo(float).eps)


class SolverSettings(BaseModel):
    """Newton tolerances, iteration caps and finite-difference step policy.

    Finite-difference steps are relative: the step for coordinate ``x`` is
    ``fd_step_first * (1 + |x|)`` (first derivatives) or
    ``fd_step_second * (1 + |x|)`` (second derivatives).
    """

    model_config = ConfigDict(frozen=True)

    newton_tol: float = Field(1e-10, gt=0, description="Residual infinity-norm tolerance")
    max_iter: int = Field(50, ge=1, description="Newton iteration cap")
    fd_step_first: float = Field(float(np.sqrt(_EPS)), gt=0)
    fd_step_second: float = Field(float(np.cbrt(_EPS)), gt=0)
    singular_tol: float = Field(1e-12, gt=0, description="Relative determinant threshold")
    backtrack_max: int = Field(30, ge=0, description="Maximum step halvings")
    step_tol: float = Field(1e-10, gt=0, description="Relative Newton-correction floor")

    def with_overrides(self, **overrides) -> "SolverSettings":
        """Return a copy with the non-None overrides applied (validated)."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return SolverSettings(**data)


DEFAULT_SETTINGS = SolverSettings()
