"""
Solve Routes - Endpoint running Peel-and-Bound
"""

from fastapi import APIRouter

from peelbound.routes.instances import resolve_instance
from peelbound.schemas.solver import SolveRequest, SolveResponse
from peelbound.services.solver import peel_and_bound, summarize


router = APIRouter(tags=["solve"])


@router.post("/solve", response_model=SolveResponse)
def solve(request: SolveRequest):
    """
    Solve an instance

    The run is bounded by config.time_limit; a run stopped by the limit returns
    the best tour found with proven_optimal false.

    Args:
        request: Instance (or n and seed) and solver configuration

    Returns:
        Run summary and the bound trace
    """
    instance = resolve_instance(request.instance, request.n, request.seed)
    result = peel_and_bound(instance, request.config)
    return SolveResponse(summary=summarize(result, request.config), trace=result.trace)
