"""
Pydantic model for the cart-pole physical constants.
"""

from pydantic import BaseModel, ConfigDict, Field


class CartPoleParams(BaseModel):
    """Physical constants of the cart-pole benchmark.

    The defaults are configuration choices of this package, not measured data.
    ``hbar`` (car height) only enters the potential as an additive constant.
    """

    model_config = ConfigDict(frozen=True)

    M: float = Field(1.0, gt=0, description="Cart mass [kg]")
    m: float = Field(0.3, gt=0, description="Pendulum mass [kg]")
    l: float = Field(0.5, gt=0, description="Distance pivot to pendulum center of mass [m]")
    g: float = Field(9.8, gt=0, description="Gravitational acceleration [m/s^2]")
    hbar: float = Field(0.0, description="Car height [m]")
