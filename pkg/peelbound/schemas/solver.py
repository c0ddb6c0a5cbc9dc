from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from peelbound.core.config import get_settings
from peelbound.schemas.instance import Instance


# ==================== CONFIGURATION SCHEMAS ====================

class PeelStrategy(str, Enum):
    MAXIMAL = "maximal"
    LAST_EXACT = "last-exact"


class QueueOrder(str, Enum):
    WORST_BOUND = "worst-bound"
    DFS = "dfs"


def _default(name: str):
    return lambda: getattr(get_settings(), name)


class SolverConfig(BaseModel):
    """Peel-and-Bound settings; defaults come from the environment"""
    dd_width: int = Field(default_factory=_default("DD_WIDTH"), ge=1, description="Relaxed diagram width")
    search_width: int = Field(default_factory=_default("SEARCH_WIDTH"), ge=1, description="Restricted search width")
    multi: int = Field(default_factory=_default("MULTI"), ge=1, description="Inner optimizer starts")
    peel_strategy: PeelStrategy = Field(default_factory=lambda: PeelStrategy(get_settings().PEEL_STRATEGY))
    queue_order: QueueOrder = Field(default_factory=lambda: QueueOrder(get_settings().QUEUE_ORDER))
    time_limit: float = Field(default_factory=_default("TIME_LIMIT_SECONDS"), gt=0, description="Seconds")
    enable_est_eat: bool = Field(False, description="Run the est/eat refinement after construction")
    tolerance: float = Field(default_factory=_default("SOLVER_TOLERANCE"), ge=0)


# ==================== RESULT SCHEMAS ====================

class BuildReport(BaseModel):
    """Counters and bounds of the initial diagram construction"""
    phase1_calls: int
    phase2_calls: int
    phase2_pruned: int = 0
    est_eat_updates: int = 0
    interrupted: bool = Field(False, description="Time limit hit before phase two finished")
    initial_lb: float
    initial_ub: float
    nn_tour: List[int]
    wall_seconds: float


class TraceRecord(BaseModel):
    """One bound-trace event"""
    t_wall: float
    lb: float
    ub: float
    queue_len: int
    b_calls: int
    bprime_calls: int


class RunSummary(BaseModel):
    """Outcome of a solver run"""
    lb: float
    ub: float
    gap_percent: float
    wall_seconds: float
    queue_remaining: int
    proven_optimal: bool
    iterations: int
    tour: List[int]
    counters: Dict[str, int]
    config: SolverConfig
    build: Optional[BuildReport] = None


# ==================== API SCHEMAS ====================

class SolveRequest(BaseModel):
    """Schema for solving an instance over HTTP"""
    instance: Optional[Instance] = None
    n: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    config: SolverConfig = Field(default_factory=SolverConfig)

    @model_validator(mode="after")
    def instance_or_generator(self) -> "SolveRequest":
        if self.instance is None and (self.n is None or self.seed is None):
            raise ValueError("provide an instance or both n and seed")
        return self


class SolveResponse(BaseModel):
    """Schema for a solver run"""
    summary: RunSummary
    trace: List[TraceRecord]
