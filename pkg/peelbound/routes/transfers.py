"""
Transfer Routes - Endpoints for single black-box evaluations
"""

import math

from fastapi import APIRouter, HTTPException, status

from peelbound.routes.instances import resolve_instance
from peelbound.schemas.transfer import TransferEvaluateRequest, TransferEvaluateResponse
from peelbound.services.transfer import LambertTransferModel


router = APIRouter(prefix="/transfers", tags=["transfers"])


@router.post("/evaluate", response_model=TransferEvaluateResponse)
def evaluate_transfer(request: TransferEvaluateRequest):
    """
    Evaluate one transfer with B, B' (tau_f given) or B~ (theta given)

    Args:
        request: Instance, bodies, earliest departure and optional bound

    Returns:
        Optimal waiting time, travel time and cost
    """
    instance = resolve_instance(request.instance, request.n, request.seed)
    for index in (request.src, request.dst):
        if index > instance.n:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST,
                detail=f"Body index {index} out of range 0..{instance.n}"
            )

    model = LambertTransferModel(instance, multi=request.multi)
    query = model.query(request.src, request.dst, request.eta, tau_f=request.tau_f, theta=request.theta)
    result = model.evaluate(query)

    kind = "black_box"
    if request.tau_f is not None:
        kind = "black_box_relaxed"
    elif request.theta is not None:
        kind = "black_box_capped"

    return TransferEvaluateResponse(
        kind=kind,
        tau=result.tau,
        t=result.t,
        z=result.z if math.isfinite(result.z) else None,
        delta_v=result.delta_v if math.isfinite(result.delta_v) else None,
        feasible=result.feasible,
    )
