"""
Instance Routes - Endpoints for generating and uploading instances
"""

from typing import Optional

from fastapi import APIRouter, File, HTTPException, UploadFile, status

from peelbound.core.errors import PeelBoundError
from peelbound.schemas.instance import GenerateRequest, Instance
from peelbound.services.instance import generate, parse_csv
from peelbound.utils.file_handler import extract_text_from_upload


router = APIRouter(prefix="/instances", tags=["instances"])


def resolve_instance(instance: Optional[Instance], n: Optional[int], seed: Optional[int]) -> Instance:
    """
    Instance given inline, or generated from (n, seed)

    Raises:
        HTTPException: Neither was provided
    """
    if instance is not None:
        return instance
    if n is None or seed is None:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Provide an instance or both n and seed"
        )
    return generate(n, seed)


@router.post("/generate", response_model=Instance)
def generate_instance(request: GenerateRequest):
    """
    Generate a synthetic instance

    Args:
        request: Asteroid count and seed

    Returns:
        Instance with Earth at index 0
    """
    return generate(request.n, request.seed)


@router.post("/upload", response_model=Instance)
def upload_instance(file: UploadFile = File(...)):
    """
    Upload an instance CSV

    Columns: name,a_km,e,i_rad,raan_rad,argp_rad,M0_rad,epoch_day

    Args:
        file: CSV file

    Returns:
        Parsed instance
    """
    text = extract_text_from_upload(file.file.read(), file.filename)
    try:
        return parse_csv(text)
    except PeelBoundError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
