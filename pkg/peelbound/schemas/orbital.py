import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


# ==================== ORBITAL ELEMENT SCHEMAS ====================

class OrbitalElements(BaseModel):
    """Keplerian elements of a heliocentric elliptical orbit"""
    model_config = ConfigDict(frozen=True)

    semi_major_axis: float = Field(..., gt=0, description="Semi-major axis (km)")
    eccentricity: float = Field(..., ge=0, lt=1, description="Eccentricity (elliptical only)")
    inclination: float = Field(..., description="Inclination (rad)")
    raan: float = Field(..., description="Right ascension of the ascending node (rad)")
    arg_periapsis: float = Field(..., description="Argument of periapsis (rad)")
    mean_anomaly_at_epoch: float = Field(..., description="Mean anomaly at epoch (rad)")
    epoch: float = Field(0.0, description="Reference epoch (days since mission start)")

    @field_validator(
        "semi_major_axis", "inclination", "raan", "arg_periapsis", "mean_anomaly_at_epoch", "epoch"
    )
    @classmethod
    def must_be_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


# ==================== CARTESIAN STATE SCHEMAS ====================

class BodyState(BaseModel):
    """Heliocentric Cartesian state; arrays carry a leading epoch axis when propagated in bulk (epoch is 0-d otherwise)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    position: np.ndarray
    velocity: np.ndarray
    epoch: np.ndarray


class LambertSolution(BaseModel):
    """Terminal velocities of a two-impulse conic transfer"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v_depart: np.ndarray
    v_arrive: np.ndarray
