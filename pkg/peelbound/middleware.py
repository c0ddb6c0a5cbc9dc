"""
Middleware for request monitoring
"""

from typing import List
import itertools
import logging
import time

from fastapi import FastAPI, Request
from starlette.middleware.base import BaseHTTPMiddleware
from starlette.middleware.cors import CORSMiddleware


logger = logging.getLogger(__name__)

# Requests slower than this are logged as warnings unless they are solver runs
SLOW_REQUEST_SECONDS = 5.0
LONG_RUNNING_PATHS = ("/solve",)


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """
    Log each request with a sequence id and its wall time

    The id and duration are returned in the X-Request-Id and X-Process-Time headers.
    """

    def __init__(self, app):
        super().__init__(app)
        self._ids = itertools.count(1)

    async def dispatch(self, request: Request, call_next):
        request_id = next(self._ids)
        path = request.url.path
        started = time.perf_counter()
        logger.info(f"[{request_id}] {request.method} {path}")

        try:
            response = await call_next(request)
        except Exception as e:
            logger.error(f"[{request_id}] {request.method} {path} failed after "
                         f"{time.perf_counter() - started:.3f}s: {e}")
            raise

        elapsed = time.perf_counter() - started
        if elapsed > SLOW_REQUEST_SECONDS and not path.startswith(LONG_RUNNING_PATHS):
            logger.warning(f"[{request_id}] slow response {response.status_code} in {elapsed:.3f}s")
        else:
            logger.info(f"[{request_id}] {response.status_code} in {elapsed:.3f}s")
        response.headers["X-Request-Id"] = str(request_id)
        response.headers["X-Process-Time"] = f"{elapsed:.6f}"
        return response


def add_cors_middleware(app: FastAPI, origins: List[str]):
    """Allow browser clients from the given origins to call the API"""
    app.add_middleware(
        CORSMiddleware,
        allow_origins=origins,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
        expose_headers=["X-Request-Id", "X-Process-Time"],
        max_age=600,
    )


def setup_middleware(app: FastAPI, cors_origins: List[str]):
    """
    Setup all middleware for the application

    Args:
        app: FastAPI application instance
        cors_origins: Allowed origins; CORS is disabled when empty
    """
    app.add_middleware(RequestLoggingMiddleware)
    if cors_origins:
        add_cors_middleware(app, cors_origins)
