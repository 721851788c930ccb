"""
Stage 2: Strategy Selection.

N-version programming across candidate mitigated distributions and per-bin
consistency-based selection across subsets of the measured noise levels.
"""
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from src.services.distributions import Distribution, QuasiDistribution
from src.services.extrapolate import PRECEDENCE, PostprocessMode, StrategyKind
from src.services.select import (
    ConsistencyReport,
    NamedDistribution,
    NVReport,
    consistency_select_per_bin,
    nversion_select,
)

router = APIRouter(prefix="/selection", tags=["stage 2 - selection"])


# =============================================================================
# Models
# =============================================================================

class NVersionRequest(BaseModel):
    candidates: list[NamedDistribution] = Field(..., min_length=3)


class NVersionResponse(BaseModel):
    selected: str
    outlier: str
    report: NVReport


class ConsistencyRequest(BaseModel):
    """Per-λ distributions keyed by scale factor; at least L+1 of them."""
    distributions: dict[float, Distribution | QuasiDistribution] = Field(..., min_length=3)
    L: int = Field(2, ge=2, description="Subset size")
    strategies: list[StrategyKind] = Field(
        default_factory=lambda: [k for k in PRECEDENCE if k is not StrategyKind.POLYEXP]
    )
    report_value: str = Field("full_fit", pattern="^(full_fit|subset_mean)$")
    postprocess: PostprocessMode = PostprocessMode.CLIP_RENORM


class ConsistencyResponse(BaseModel):
    distribution: Distribution | QuasiDistribution
    quasi: QuasiDistribution
    chosen: dict[str, str]
    reports: dict[str, ConsistencyReport]


# =============================================================================
# Endpoints
# =============================================================================

@router.post("/nversion", response_model=NVersionResponse, summary="N-version programming over candidates")
def nversion(request: NVersionRequest):
    """Selects the candidate with the smallest summed TVD to the others."""
    try:
        report = nversion_select(request.candidates)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return NVersionResponse(selected=report.selected_name, outlier=report.outlier_name, report=report)


@router.post("/consistency", response_model=ConsistencyResponse, summary="Per-bin consistency-based selection")
def consistency(request: ConsistencyRequest):
    """
    For every bitstring, evaluates each strategy on all C(K, L) subsets of the
    noise levels and keeps the one with the smallest variance.
    """
    try:
        selection = consistency_select_per_bin(
            request.distributions,
            request.L,
            request.strategies,
            report_value=request.report_value,
            mode=request.postprocess,
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return ConsistencyResponse(
        distribution=selection.distribution,
        quasi=selection.quasi,
        chosen=selection.chosen,
        reports=selection.reports,
    )
