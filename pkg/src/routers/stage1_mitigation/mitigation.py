"""
Stage 1: Error Mitigation.

Zero-noise extrapolation of per-λ distributions and linear-ansatz estimators
(Monte-Carlo and direct) with their sampling-overhead accounting.
"""
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from src.services.distributions import Distribution, QuasiDistribution
from src.services.estimator import (
    LinearAnsatz,
    ShotPlan,
    direct_estimate,
    exact_combination,
    mc_estimate,
    optimal_shot_allocation,
    sampling_overhead,
    variance_direct,
)
from src.services.extrapolate import (
    BinFlag,
    PostprocessMode,
    Strategy,
    StrategyKind,
    mitigate_distribution,
    postprocess,
)

router = APIRouter(prefix="/mitigation", tags=["stage 1 - mitigation"])


# =============================================================================
# Models
# =============================================================================

class MitigateRequest(BaseModel):
    """Per-λ measured distributions keyed by scale factor."""
    strategy: StrategyKind = Field(..., examples=["richardson"])
    n_points: int | None = Field(None, ge=2, description="Use only the n smallest λ")
    fallback: StrategyKind = StrategyKind.LINEAR
    distributions: dict[float, Distribution | QuasiDistribution] = Field(..., min_length=2)
    postprocess: PostprocessMode = PostprocessMode.CLIP_RENORM


class MitigateResponse(BaseModel):
    strategy: StrategyKind
    distribution: Distribution | QuasiDistribution
    quasi: QuasiDistribution
    flags: dict[str, BinFlag]


class AnsatzRequest(BaseModel):
    """Coefficients c_k over the given noisy distributions."""
    coefficients: list[float] = Field(..., min_length=1, examples=[[1.5, -0.5]])
    distributions: list[Distribution] = Field(..., min_length=1)

    def ansatz(self) -> LinearAnsatz:
        return LinearAnsatz.from_distributions(self.coefficients, self.distributions)


class AllocationRequest(BaseModel):
    coefficients: list[float] = Field(..., min_length=1, examples=[[1.5, -0.5]])
    n_total: int = Field(..., ge=1, examples=[5000])


class AllocationResponse(BaseModel):
    plan: ShotPlan
    gamma: float
    direct_overhead: float
    mc_overhead: float


class DirectRequest(AnsatzRequest):
    allocations: list[int] | None = Field(None, description="Shots per term; optimal for n_total when omitted")
    n_total: int = Field(5000, ge=1)
    seed: int = 0


class DirectResponse(BaseModel):
    estimate: QuasiDistribution
    exact: QuasiDistribution
    plan: ShotPlan
    variance: dict[str, float]
    total_variance: float
    bound: float


class MonteCarloRequest(AnsatzRequest):
    n_meas: int = Field(5000, ge=1)
    seed: int = 0


class MonteCarloResponse(BaseModel):
    estimate: QuasiDistribution
    exact: QuasiDistribution
    gamma: float
    bound: float


# =============================================================================
# Endpoints
# =============================================================================

@router.post("/distribution", response_model=MitigateResponse, summary="Extrapolate every bin to zero noise")
def mitigate(request: MitigateRequest):
    """
    Applies one extrapolation strategy to each bitstring independently.

    Bins zero at every λ stay zero; bins the strategy cannot fit use the
    fallback and are flagged.
    """
    try:
        result = mitigate_distribution(
            Strategy(kind=request.strategy, n_points=request.n_points),
            request.distributions,
            fallback=Strategy(kind=request.fallback),
        )
        dist = postprocess(result.quasi, request.postprocess)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return MitigateResponse(strategy=request.strategy, distribution=dist, quasi=result.quasi, flags=result.flags)


@router.post("/allocation", response_model=AllocationResponse, summary="Optimal shot allocation N^(k) ∝ |c_k|")
def allocation(request: AllocationRequest):
    """Splits n_total shots across ansatz terms and reports both sampling overheads."""
    try:
        # Allocation depends on coefficients only; any valid source fills the terms.
        placeholder = Distribution(n_bits=1, probs={"0": 1.0})
        ansatz = LinearAnsatz.from_distributions(request.coefficients, [placeholder] * len(request.coefficients))
        plan = optimal_shot_allocation(ansatz, request.n_total)
        direct, mc = sampling_overhead(ansatz, plan)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return AllocationResponse(plan=plan, gamma=ansatz.gamma, direct_overhead=direct, mc_overhead=mc)


@router.post("/direct", response_model=DirectResponse, summary="Direct estimator with variance accounting")
def direct(request: DirectRequest):
    """
    Samples each term with its own shot budget and combines the empirical
    distributions linearly.
    """
    try:
        ansatz = request.ansatz()
        if request.allocations is not None:
            plan = ShotPlan(allocations=tuple(request.allocations))
        else:
            plan = optimal_shot_allocation(ansatz, request.n_total)
        estimate = direct_estimate(ansatz, plan, request.seed)
        variance = variance_direct(ansatz, plan, request.distributions)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return DirectResponse(
        estimate=estimate,
        exact=exact_combination(ansatz),
        plan=plan,
        variance=variance.per_bin,
        total_variance=variance.total,
        bound=variance.bound,
    )


@router.post("/montecarlo", response_model=MonteCarloResponse, summary="Monte-Carlo estimator")
def montecarlo(request: MonteCarloRequest):
    """Samples terms with probability |c_k|/Γ; the total variance stays below Γ²/N_meas."""
    try:
        ansatz = request.ansatz()
        estimate, gamma = mc_estimate(ansatz, request.n_meas, request.seed)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return MonteCarloResponse(
        estimate=estimate,
        exact=exact_combination(ansatz),
        gamma=gamma,
        bound=gamma ** 2 / request.n_meas,
    )
