"""
app/api/routes.py
─────────────────
REST API endpoints.

POST /api/v1/run
    Body: RunRequest (FCIDUMP text, optional dipole text, active space, rank,
    methods, herm, frequencies, optimizer options)
    Returns: ResultDocument (converged=false is still a 200)

POST /api/v1/spectrum
    Body: SpectrumRequest { "document": ResultDocument, "broadening": ..., "width_ev": ... }
    Returns: one SpectrumCurve per method without an error

GET  /api/v1/resources?method=SC&method=ST
    Returns measurement-resource rows (all methods when none is given).

Error handling:
  • 422: request validation, malformed integrals, bad partition or pool rank
  • 413: determinant space above MAX_DETERMINANTS
  • 409: numerical failure (singular metric, complex spectrum, resonance, ...)
  • 500: Unexpected (caught by global handler in main.py)
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool

from app.core.errors import (
    DimensionOverflowError,
    IntegralParseError,
    MethodConfigError,
    PartitionError,
    PoolRankError,
    QLRError,
    SpectrumError,
)
from app.core.models import MethodId, ResourceRow, ResultDocument, RunRequest, SpectrumCurve, SpectrumRequest
from app.services.pipeline import describe, run_from_text
from app.services.resources import resource_table
from app.services.spectra import spectra_from_document
from app.utils.logger import get_logger

logger = get_logger(__name__)

router = APIRouter()

_UNPROCESSABLE = (IntegralParseError, PartitionError, MethodConfigError, PoolRankError, SpectrumError)


def to_http(error: QLRError) -> HTTPException:
    if isinstance(error, DimensionOverflowError):
        status = 413
    elif isinstance(error, _UNPROCESSABLE):
        status = 422
    else:
        status = 409
    return HTTPException(status_code=status, detail=describe(error))


@router.post(
    "/run",
    response_model=ResultDocument,
    summary="Ground state and linear response for the requested methods",
    tags=["qLR"],
)
async def run(body: RunRequest) -> ResultDocument:
    logger.info("Request received", active=body.active, methods=[m.value for m in body.methods], herm=body.herm)
    try:
        artifacts = await run_in_threadpool(run_from_text, body.fcidump_text, body.dipoles_text, body)
    except QLRError as e:
        logger.error("Run failed", error=str(e), module=e.module)
        raise to_http(e)
    return artifacts.document


@router.post(
    "/spectrum",
    response_model=List[SpectrumCurve],
    summary="Broadened spectra from a result document",
    tags=["qLR"],
)
async def spectrum(body: SpectrumRequest) -> List[SpectrumCurve]:
    try:
        return await run_in_threadpool(spectra_from_document, body.document, body.broadening, body.width_ev, body.methods)
    except QLRError as e:
        logger.error("Spectrum failed", error=str(e))
        raise to_http(e)


@router.get("/resources", response_model=List[ResourceRow], summary="Measurement-resource table", tags=["qLR"])
async def resources(method: Optional[List[MethodId]] = Query(None)) -> List[ResourceRow]:
    return resource_table(method)
