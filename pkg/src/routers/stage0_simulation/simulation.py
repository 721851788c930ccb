"""
Stage 0: Noisy Circuit Simulation.

Builds the Trotterized transverse-field Ising circuit, amplifies its noise and
returns the exact (or sampled) output distribution of the density-matrix
simulator. Also exposes the Trotter defect against exact evolution.
"""
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from src.services.circuits import (
    Amplification,
    TFIParams,
    amplify,
    build_trotter_tfi,
    trotter_defect,
    trotter_error_bound,
)
from src.services.distributions import Distribution
from src.services.estimator import empirical_distribution, sample_counts
from src.services.simcore import NoiseModel, output_distribution, simulate

router = APIRouter(prefix="/simulation", tags=["stage 0 - simulation"])


# =============================================================================
# Models
# =============================================================================

class TrotterRequest(BaseModel):
    """Circuit parameters plus the noise setting to simulate it under."""
    params: TFIParams = Field(..., examples=[{"n_qubits": 3, "J": 1.0, "B": 1.0, "t": 1.0, "M": 5}])
    noise: NoiseModel = NoiseModel()
    scale: int = Field(1, ge=1, description="Noise scale factor λ (odd)", examples=[3])
    amplification: Amplification = Amplification.FOLD
    apply_readout: bool = Field(True, description="Apply the readout flip channel")
    shots: int | None = Field(None, ge=1, description="Sample this many shots instead of the exact diagonal")
    seed: int = Field(0, description="Sampling seed (used with shots)")


class TrotterResponse(BaseModel):
    n_gates: int
    scale: int
    distribution: Distribution


class DefectResponse(BaseModel):
    M: int
    defect: float
    bound: float


# =============================================================================
# Endpoints
# =============================================================================

@router.post("/trotter", response_model=TrotterResponse, summary="Simulate a noisy Trotterized TFI circuit")
def simulate_trotter(request: TrotterRequest):
    """
    Simulates the Trotterized circuit at scale factor λ.

    Folding keeps the unitary and repeats each gate's noise λ times; rate
    scaling multiplies the depolarizing rates by λ instead.
    """
    try:
        circuit, noise = amplify(
            build_trotter_tfi(request.params), request.noise, request.scale, request.amplification
        )
        readout = noise.readout_flip if request.apply_readout else 0.0
        dist = output_distribution(simulate(circuit, noise), readout)
        if request.shots:
            dist = empirical_distribution(sample_counts(dist, request.shots, request.seed))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return TrotterResponse(n_gates=len(circuit.gates), scale=request.scale, distribution=dist)


@router.post("/defect", response_model=DefectResponse, summary="Trotter defect against exact evolution")
def defect(params: TFIParams):
    """Returns ‖e^{−iHt} − U_Trotter‖ and the first-order commutator bound."""
    try:
        return DefectResponse(M=params.M, defect=trotter_defect(params), bound=trotter_error_bound(params))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
