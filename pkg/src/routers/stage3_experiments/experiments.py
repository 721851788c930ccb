"""
Stage 3: Ranking Experiments.

Runs the (J, B, M) sweep that ranks mitigation strategies by TVD to the ideal
distribution, and renders records or rank summaries as table, CSV or JSON.
"""
from fastapi import APIRouter, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from src.config import get_settings
from src.services.harness import ExperimentConfig, Preset, RankSummary, RunRecord, run_sweep
from src.services.redis import get_run_cache
from src.services.reporting import ReportFormat, record_rows, report, write_results

router = APIRouter(prefix="/experiments", tags=["stage 3 - experiments"])


# =============================================================================
# Models
# =============================================================================

class SweepRequest(BaseModel):
    """A preset and/or explicit ExperimentConfig fields; explicit fields win."""
    preset: Preset | None = Field(None, examples=["nversion_experiment"])
    full_scale: bool = Field(False, description="Full grid: 10 qubits, J,B in 1..10, M in 5..10")
    config: dict = Field(default_factory=dict, examples=[{"J_values": [1.0, 2.0], "B_values": [1.0], "M_values": [5]}])
    save: bool = Field(False, description="Write result files under Settings.results_dir")

    def experiment_config(self) -> ExperimentConfig:
        if self.preset:
            return ExperimentConfig.preset(self.preset, full_scale=self.full_scale, **self.config)
        if self.full_scale:
            return ExperimentConfig.full_scale(**self.config)
        return ExperimentConfig(**self.config)


class SweepResponse(BaseModel):
    runs: int
    fingerprint: str
    rows: list[dict]
    summaries: list[RankSummary]
    files: list[str] = Field(default_factory=list)


class ReportRequest(BaseModel):
    records: list[RunRecord] | None = None
    summaries: list[RankSummary] | None = None
    format: ReportFormat = ReportFormat.TABLE


# =============================================================================
# Endpoints
# =============================================================================

@router.post("/sweep", response_model=SweepResponse, summary="Run a ranking sweep")
def sweep(request: SweepRequest):
    """
    Runs every (J, B, M) of the configured grid and returns per-candidate rows
    plus the per-M rank summaries.

    Cached runs are reused when a redis URL is configured.
    """
    try:
        config = request.experiment_config()
        result = run_sweep(config, cache=get_run_cache())
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    files = []
    if request.save:
        out_dir = f"{get_settings().results_dir}/{config.fingerprint()}"
        files = [str(p) for p in write_results(result.records, result.summaries, out_dir).values()]

    return SweepResponse(
        runs=len(result.records),
        fingerprint=config.fingerprint(),
        rows=record_rows(result.records),
        summaries=result.summaries,
        files=files,
    )


@router.post("/report", response_class=PlainTextResponse, summary="Render records or summaries")
def render_report(request: ReportRequest):
    """Renders whichever of records or summaries is supplied (records first)."""
    try:
        return report(request.records or request.summaries or [], request.format)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
