from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from peelbound.schemas.orbital import OrbitalElements


# ==================== BODY SCHEMAS ====================

class Body(BaseModel):
    """A named body with its orbit"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Body name")
    elements: OrbitalElements


# ==================== INSTANCE SCHEMAS ====================

class Instance(BaseModel):
    """An Asteroid Routing Problem instance; body 0 is Earth"""
    model_config = ConfigDict(frozen=True)

    bodies: List[Body] = Field(..., description="Earth followed by the asteroids")
    seed: Optional[int] = Field(None, description="Generator seed, if synthetic")
    tau_max: float = Field(730.0, gt=0, description="Upper bound on waiting time per leg (days)")
    t_max: float = Field(730.0, gt=0, description="Upper bound on travel time per leg (days)")
    mission_start: float = Field(0.0, description="Mission start epoch (days)")

    @field_validator("bodies")
    @classmethod
    def needs_an_asteroid(cls, v: List[Body]) -> List[Body]:
        if len(v) < 2:
            raise ValueError("an instance needs Earth and at least one asteroid")
        return v

    @field_validator("mission_start")
    @classmethod
    def starts_at_zero(cls, v: float) -> float:
        if v != 0.0:
            raise ValueError("mission_start must be 0; normalize epochs on load")
        return v

    @model_validator(mode="after")
    def names_are_unique(self) -> "Instance":
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError("body names must be unique")
        return self

    @property
    def n(self) -> int:
        """Number of asteroids"""
        return len(self.bodies) - 1

    def elements(self, index: int) -> OrbitalElements:
        return self.bodies[index].elements


class GenerateRequest(BaseModel):
    """Schema for synthetic instance generation"""
    n: int = Field(..., ge=1, description="Number of asteroids")
    seed: int = Field(..., ge=0, description="Generator seed")


class TourEvaluateRequest(BaseModel):
    """Schema for evaluating a tour"""
    instance: Optional[Instance] = None
    n: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    tour: List[int] = Field(..., description="Body indices starting with 0 (Earth)")
    multi: int = Field(1, ge=1)


class TourEvaluateResponse(BaseModel):
    """Schema for tour evaluation result"""
    tour: List[int]
    cost: Optional[float] = Field(None, description="Total cost; null when a leg is infeasible")
    feasible: bool
    b_calls: int
