"""
Peel-and-Bound Asteroid Routing Solver - FastAPI Application
Exposes instance generation, transfer and tour evaluation, and solving over HTTP
"""

from datetime import datetime
import logging

import numpy as np
from fastapi import FastAPI, HTTPException, Request, status
from fastapi.responses import JSONResponse

from peelbound.core.config import get_settings
from peelbound.core.errors import PeelBoundError
from peelbound.middleware import setup_middleware
from peelbound.routes.instances import router as instances_router
from peelbound.routes.solve import router as solve_router
from peelbound.routes.tours import router as tours_router
from peelbound.routes.transfers import router as transfers_router
from peelbound.services.orbital import solve_kepler


# Get settings
settings = get_settings()

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

# Create FastAPI application
app = FastAPI(
    title=settings.API_TITLE,
    description=settings.API_DESCRIPTION,
    version=settings.API_VERSION,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json"
)

# Setup middleware
setup_middleware(app, cors_origins=settings.CORS_ORIGINS)


# ==================== HEALTH CHECK ENDPOINTS ====================

@app.get("/health", tags=["health"])
async def health_check():
    """
    Basic health check endpoint

    Returns:
        Health status
    """
    return {
        "status": "healthy",
        "timestamp": datetime.utcnow().isoformat(),
        "service": settings.API_TITLE,
        "version": settings.API_VERSION,
    }


@app.get("/health/ready", tags=["health"])
async def readiness_check():
    """
    Readiness check endpoint
    Verifies the numerical kernels by solving Kepler's equation once

    Returns:
        Readiness status
    """
    try:
        E = float(solve_kepler(1.0, 0.5))
        residual = abs(E - 0.5 * np.sin(E) - 1.0)
        if residual > 1e-10:
            raise ValueError(f"Kepler residual {residual:.3e}")
        return {
            "ready": True,
            "kernels": "ok",
            "timestamp": datetime.utcnow().isoformat()
        }
    except Exception as e:
        logger.error(f"Readiness check failed: {str(e)}")
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="Service not ready"
        )


# ==================== INCLUDE ROUTERS ====================

app.include_router(instances_router)
app.include_router(transfers_router)
app.include_router(tours_router)
app.include_router(solve_router)


# ==================== ERROR HANDLERS ====================

@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    """
    Custom HTTP exception handler
    """
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "status": "error",
            "detail": exc.detail,
            "timestamp": datetime.utcnow().isoformat()
        }
    )


@app.exception_handler(PeelBoundError)
async def peelbound_exception_handler(request: Request, exc: PeelBoundError):
    """
    Domain errors (bad instance, bad tour, contract violations) are client errors
    """
    logger.warning(f"{type(exc).__name__}: {str(exc)}")
    return JSONResponse(
        status_code=status.HTTP_400_BAD_REQUEST,
        content={
            "status": "error",
            "detail": str(exc),
            "error_type": type(exc).__name__,
            "timestamp": datetime.utcnow().isoformat()
        }
    )


@app.exception_handler(Exception)
async def general_exception_handler(request: Request, exc: Exception):
    """
    Catch-all exception handler for unexpected errors
    """
    logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)

    # In development, show error details; in production, be vague
    detail = str(exc) if settings.DEBUG else "Internal server error"

    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={
            "status": "error",
            "detail": detail,
            "timestamp": datetime.utcnow().isoformat()
        }
    )


# ==================== STARTUP AND SHUTDOWN EVENTS ====================

@app.on_event("startup")
async def startup_event():
    """Log the version and the solver defaults requests fall back to"""
    logger.info(f"Starting {settings.API_TITLE} v{settings.API_VERSION} ({settings.ENVIRONMENT})")
    logger.info(
        f"Solver defaults: dd_width={settings.DD_WIDTH} search_width={settings.SEARCH_WIDTH} "
        f"multi={settings.MULTI} peel={settings.PEEL_STRATEGY} queue={settings.QUEUE_ORDER} "
        f"time_limit={settings.TIME_LIMIT_SECONDS}s horizon={settings.TAU_MAX_DAYS}+{settings.T_MAX_DAYS} days"
    )


@app.on_event("shutdown")
async def shutdown_event():
    logger.info(f"Shutting down {settings.API_TITLE}")
