"""
Tour Routes - Endpoints for evaluating complete tours
"""

import math

from fastapi import APIRouter

from peelbound.routes.instances import resolve_instance
from peelbound.schemas.instance import TourEvaluateRequest, TourEvaluateResponse
from peelbound.services.instance import evaluate_tour
from peelbound.services.memo import BoundMemo
from peelbound.services.transfer import LambertTransferModel


router = APIRouter(prefix="/tours", tags=["tours"])


@router.post("/evaluate", response_model=TourEvaluateResponse)
def evaluate(request: TourEvaluateRequest):
    """
    Evaluate a tour with the exact black box

    Args:
        request: Instance (or n and seed), tour and optimizer starts

    Returns:
        Total cost, feasibility and number of evaluations
    """
    instance = resolve_instance(request.instance, request.n, request.seed)
    memo = BoundMemo(LambertTransferModel(instance, multi=request.multi))
    cost = evaluate_tour(instance, request.tour, memo)
    return TourEvaluateResponse(
        tour=request.tour,
        cost=cost if math.isfinite(cost) else None,
        feasible=math.isfinite(cost),
        b_calls=memo.model.b_calls,
    )
