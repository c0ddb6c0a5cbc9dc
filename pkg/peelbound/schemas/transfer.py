from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from peelbound.schemas.instance import Instance


# ==================== TRANSFER SCHEMAS ====================

class TransferQuery(BaseModel):
    """Inputs of the black-box transfer functions"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    src: int = Field(..., ge=0, alias="from", description="Departure body index")
    dst: int = Field(..., ge=0, alias="to", description="Arrival body index")
    eta: float = Field(..., ge=0, description="Earliest departure epoch (days)")
    tau_max: float = Field(730.0, gt=0, description="Upper bound on waiting time (days)")
    t_max: float = Field(730.0, gt=0, description="Upper bound on travel time (days)")
    tau_f: Optional[float] = Field(None, ge=0, description="Relaxed waiting bound (days)")
    theta: Optional[float] = Field(None, ge=0, description="Cap on waiting plus travel time (days)")
    multi: int = Field(1, ge=1, description="Number of optimizer starts")

    @model_validator(mode="after")
    def distinct_bodies(self) -> "TransferQuery":
        if self.src == self.dst:
            raise ValueError("from and to must differ")
        if self.tau_f is not None and self.theta is not None:
            raise ValueError("tau_f and theta are mutually exclusive")
        return self


class TransferResult(BaseModel):
    """Outputs of the black-box transfer functions"""
    model_config = ConfigDict(frozen=True)

    tau: float = Field(..., description="Waiting time (days)")
    t: float = Field(..., description="Travel time (days)")
    z: float = Field(..., description="Cost (km/s-equivalent)")
    delta_v: float = Field(..., description="Impulsive velocity change (km/s)")
    feasible: bool = True


class TransferEvaluateRequest(BaseModel):
    """Schema for evaluating a single transfer over HTTP"""
    model_config = ConfigDict(populate_by_name=True)

    instance: Optional[Instance] = None
    n: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    src: int = Field(..., ge=0, alias="from")
    dst: int = Field(..., ge=0, alias="to")
    eta: float = Field(0.0, ge=0)
    tau_f: Optional[float] = Field(None, ge=0)
    theta: Optional[float] = Field(None, ge=0)
    multi: int = Field(1, ge=1)

    @model_validator(mode="after")
    def one_bound_between_distinct_bodies(self) -> "TransferEvaluateRequest":
        if self.src == self.dst:
            raise ValueError("from and to must differ")
        if self.tau_f is not None and self.theta is not None:
            raise ValueError("tau_f and theta are mutually exclusive")
        return self


class TransferEvaluateResponse(BaseModel):
    """Schema for a single transfer evaluation"""
    kind: str = Field(..., description="black_box, black_box_relaxed or black_box_capped")
    tau: float
    t: float
    z: Optional[float] = Field(None, description="Cost; null when infeasible")
    delta_v: Optional[float] = None
    feasible: bool
