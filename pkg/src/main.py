from fastapi import FastAPI, Depends
from fastapi.responses import RedirectResponse
from src.config import Settings, get_settings
from src.routers.stage0_simulation import simulation
from src.routers.stage1_mitigation import mitigation
from src.routers.stage2_selection import selection
from src.routers.stage3_experiments import experiments

# OpenAPI tag definitions for Swagger UI grouping.
tags_metadata = [
    {
        "name": "stage 0 - simulation",
        "description": "Density-matrix simulation of Trotterized TFI circuits under depolarizing and readout noise.",
    },
    {
        "name": "stage 1 - mitigation",
        "description": "Zero-noise extrapolation of full distributions and linear-ansatz estimators.",
    },
    {
        "name": "stage 2 - selection",
        "description": "N-version programming and consistency-based choice of extrapolation strategy.",
    },
    {
        "name": "stage 3 - experiments",
        "description": "Ranking sweeps over (J, B, M) and their table, CSV and JSON reports.",
    },
    {
        "name": "system",
        "description": "Service health and configuration endpoints.",
    },
]

app = FastAPI(
    title="QEM Selection Toolkit",
    description="Noisy circuit simulation, zero-noise extrapolation and data-driven selection of mitigation strategies.",
    version="1.0.0",
    openapi_tags=tags_metadata,
)


@app.get("/status", tags=["system"], summary="Check service health.")
async def status():
    """Returns the current health status of the service."""
    return {"status": "ok"}


@app.get("/settings", tags=["system"], summary="Retrieve environment configuration.")
async def read_settings(settings: Settings = Depends(get_settings)):
    """Returns the active simulation limits and environment name."""
    return {
        "environment_name": settings.environment_name,
        "max_qubits": settings.max_qubits,
        "max_exact_qubits": settings.max_exact_qubits,
        "run_cache": settings.redis_url is not None,
    }

app.include_router(simulation.router)
app.include_router(mitigation.router)
app.include_router(selection.router)
app.include_router(experiments.router)

@app.get("/", include_in_schema=False)
def redirect_to_docs():
    return RedirectResponse(url="/docs")
