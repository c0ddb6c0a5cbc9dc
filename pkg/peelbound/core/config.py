from functools import lru_cache
from typing import List

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # API Configuration
    API_TITLE: str = "Peel-and-Bound Asteroid Routing Solver"
    API_VERSION: str = "1.0.0"
    API_DESCRIPTION: str = "Decision-diagram Peel-and-Bound solver for the Asteroid Routing Problem"

    # Application
    DEBUG: bool = False
    ENVIRONMENT: str = "production"
    LOG_LEVEL: str = "INFO"
    CORS_ORIGINS: List[str] = ["*"]

    # Problem horizon (days)
    TAU_MAX_DAYS: float = 730.0
    T_MAX_DAYS: float = 730.0

    # Solver defaults
    DD_WIDTH: int = 2048
    SEARCH_WIDTH: int = 400
    MULTI: int = 1
    PEEL_STRATEGY: str = "maximal"
    QUEUE_ORDER: str = "worst-bound"
    TIME_LIMIT_SECONDS: float = 3600.0
    SOLVER_TOLERANCE: float = 1e-9

    # Inner optimizer
    TRANSFER_GRID_DAYS: float = 30.0
    INNER_MAX_ITER: int = 100
    FINITE_DIFF_STEP_DAYS: float = 1e-3

    # Trace output
    TRACE_FLUSH: bool = True

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
