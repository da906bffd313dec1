"""
Pydantic model for experiment configuration.

Every field can come from a ``key=value`` settings file or a ``--key value``
command flag; vectors are written as comma separated numbers.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.schemas.cartpole import CartPoleParams
from src.schemas.settings import SolverSettings, DEFAULT_SETTINGS
from src.utils.exceptions import ConfigError

SEED_KEYS = ("q2", "q3", "lam0", "lam1")
BOUNDARY_KEYS = ("qNm1", "qN")
STATE_KEYS = ("state",)

# data groups each run mode requires (and the groups it must not receive)
MODE_GROUPS = {
    "flow": "seed",
    "energy": "seed",
    "bvp": "boundary",
    "oracle": "boundary",
    "convergence": "state",
    "check": None,
}

_VECTOR_FIELDS = ("q0", "q1", "q2", "q3", "lam0", "lam1", "qNm1", "qN", "state", "h_list")


class ExperimentConfig(BaseModel):
    """Configuration of a single CLI run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["cartpole", "biharmonic"] = "cartpole"

    # cart-pole parameters
    M: float = Field(1.0, gt=0)
    m: float = Field(0.3, gt=0)
    l: float = Field(0.5, gt=0)
    g: float = Field(9.8, gt=0)
    hbar: float = 0.0

    h: float = Field(0.01, gt=0, description="Time step [s]")
    N: int = Field(200, ge=4, description="Index of the last node")

    q0: Optional[List[float]] = None
    q1: Optional[List[float]] = None
    q2: Optional[List[float]] = None
    q3: Optional[List[float]] = None
    lam0: Optional[List[float]] = None
    lam1: Optional[List[float]] = None
    qNm1: Optional[List[float]] = None
    qN: Optional[List[float]] = None
    state: Optional[List[float]] = Field(None, description="Continuous start state for convergence runs")

    t_final: float = Field(0.5, gt=0)
    h_list: List[float] = Field(default_factory=lambda: [0.02, 0.01, 0.005])

    newton_tol: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)
    singular_tol: Optional[float] = Field(None, gt=0)
    backtrack_max: Optional[int] = Field(None, ge=0)
    step_tol: Optional[float] = Field(None, gt=0)

    project_seed: bool = False
    homotopy_stages: int = Field(1, ge=1)
    perturbation_samples: int = Field(0, ge=0)
    window: int = Field(50, ge=2, description="Early window of the energy band check")
    corrupt: Optional[str] = Field(None, description="Derivative to corrupt in the check suite")

    output_dir: str = "results"
    plot: bool = True

    @field_validator(*_VECTOR_FIELDS, mode="before")
    @classmethod
    def _split_vector(cls, value):
        if isinstance(value, str):
            text = value.strip().strip("[]()")
            return [float(v) for v in text.split(",") if v.strip()] if text else []
        return value

    def params(self) -> CartPoleParams:
        return CartPoleParams(M=self.M, m=self.m, l=self.l, g=self.g, hbar=self.hbar)

    def settings(self, base: SolverSettings = DEFAULT_SETTINGS) -> SolverSettings:
        return base.with_overrides(
            newton_tol=self.newton_tol, max_iter=self.max_iter, singular_tol=self.singular_tol,
            backtrack_max=self.backtrack_max, step_tol=self.step_tol,
        )

    def present_groups(self) -> List[str]:
        groups = []
        if any(getattr(self, k) is not None for k in SEED_KEYS):
            groups.append("seed")
        if any(getattr(self, k) is not None for k in BOUNDARY_KEYS):
            groups.append("boundary")
        if self.state is not None:
            groups.append("state")
        return groups

    def require_mode(self, mode: str) -> "ExperimentConfig":
        """Check that exactly the data group of ``mode`` is present."""
        if mode not in MODE_GROUPS:
            raise ConfigError(f"unknown run mode '{mode}'")
        wanted = MODE_GROUPS[mode]
        present = self.present_groups()
        extra = [g for g in present if g != wanted]
        if extra:
            raise ConfigError(f"mode '{mode}' does not take {' or '.join(extra)} data")
        if wanted is None:
            return self

        required = {"seed": ("q0", "q1", "q2", "q3"),
                    "boundary": ("q0", "q1", "qNm1", "qN"),
                    "state": ("state",)}[wanted]
        missing = [k for k in required if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"mode '{mode}' needs {', '.join(missing)}")
        if wanted == "state" and len(self.state) != 8:
            raise ConfigError(f"state needs 8 values, got {len(self.state)}")
        if mode == "convergence" and len(self.h_list) < 3:
            raise ConfigError(f"a convergence study needs at least 3 step sizes, got {len(self.h_list)}")
        return self
