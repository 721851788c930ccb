"""
Zero-Noise Extrapolation.

Per-bin extrapolation of measured values v(λ) to λ = 0 with four model
families, distribution-level mitigation with the all-zero rule, and
postprocessing of the resulting quasi-distribution.

Model families:
- Linear:      v = a + bλ              (exact through 2 points, least squares beyond)
- Richardson:  degree L−1 polynomial   (C_λ = ∏_{λ'≠λ} λ'/(λ'−λ))
- Exponential: v = a·e^{bλ}            (log-linear, needs v > 0)
- PolyExp:     v = θ₀·e^{θ₁λ + θ₂λ²}   (log-quadratic, needs v > 0)
"""
import logging
import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.services.distributions import Distribution, QuasiDistribution

logger = logging.getLogger(__name__)


class StrategyKind(str, Enum):
    LINEAR = "linear"
    RICHARDSON = "richardson"
    EXPONENTIAL = "exponential"
    POLYEXP = "polyexp"


# Simplest model first; also the tie-break order for selection.
PRECEDENCE = [
    StrategyKind.LINEAR,
    StrategyKind.RICHARDSON,
    StrategyKind.EXPONENTIAL,
    StrategyKind.POLYEXP,
]

MIN_POINTS = {
    StrategyKind.LINEAR: 2,
    StrategyKind.RICHARDSON: 2,
    StrategyKind.EXPONENTIAL: 2,
    StrategyKind.POLYEXP: 3,
}

# Points used when mitigating a full sweep: the closed forms use λ ∈ {1, 3}
# for Linear/Exponential and every available λ for Richardson/PolyExp.
DEFAULT_POINTS = {
    StrategyKind.LINEAR: 2,
    StrategyKind.RICHARDSON: None,
    StrategyKind.EXPONENTIAL: 2,
    StrategyKind.POLYEXP: None,
}


class BinFlag(str, Enum):
    OK = "ok"
    ALL_ZERO = "all-zero"
    FALLBACK = "fallback"


class PostprocessMode(str, Enum):
    CLIP_RENORM = "clip_renorm"
    RAW = "raw"


# =============================================================================
# Models
# =============================================================================

class MeasuredPoint(BaseModel):
    """Value measured at noise scale λ; shots = 0 means exact."""
    model_config = ConfigDict(frozen=True)

    scale: float = Field(..., ge=1.0)
    value: float
    shots: int = Field(0, ge=0)


class FitResult(BaseModel):
    mitigated: float | None = None
    params: tuple[float, ...] | None = None
    applicable: bool = True
    flag: str | None = None


class Strategy(BaseModel):
    """Extrapolation family plus how many of the smallest λ it consumes (None = all)."""
    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    n_points: int | None = None

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def min_points(self) -> int:
        return MIN_POINTS[self.kind]

    def select_points(self, points: list[MeasuredPoint]) -> list[MeasuredPoint]:
        ordered = sorted(points, key=lambda p: p.scale)
        wanted = self.n_points if self.n_points is not None else DEFAULT_POINTS[self.kind]
        chosen = ordered if wanted is None else ordered[:wanted]
        if len(chosen) < max(self.min_points, wanted or 0):
            raise ValueError(
                f"{self.name} extrapolation needs {max(self.min_points, wanted or 0)} points, "
                f"got {len(ordered)}"
            )
        return chosen


def _distinct_scales(points: list[MeasuredPoint], minimum: int, name: str) -> np.ndarray:
    if len(points) < minimum:
        raise ValueError(f"{name} extrapolation needs at least {minimum} points, got {len(points)}")
    scales = np.array([p.scale for p in points], dtype=float)
    if len(set(scales.tolist())) != len(scales):
        raise ValueError(f"Duplicate scale factors in {scales.tolist()}")
    return scales


# =============================================================================
# Strategies
# =============================================================================

def extrapolate_linear(points: list[MeasuredPoint]) -> FitResult:
    """Line through the points (least squares beyond two), evaluated at λ = 0."""
    scales = _distinct_scales(points, 2, "Linear")
    values = np.array([p.value for p in points])
    if len(points) == 2:
        (la, lb), (va, vb) = scales, values
        intercept = (lb * va - la * vb) / (lb - la)
        slope = (vb - va) / (lb - la)
    else:
        slope, intercept = np.polyfit(scales, values, 1)
    return FitResult(mitigated=float(intercept), params=(float(intercept), float(slope)))


def richardson_coefficients(scales: list[float]) -> np.ndarray:
    """C_λ = ∏_{λ' ≠ λ} λ' / (λ' − λ)."""
    scales = [float(s) for s in scales]
    if len(set(scales)) != len(scales):
        raise ValueError(f"Duplicate scale factors in {scales}")
    return np.array([
        math.prod(other / (other - s) for other in scales if other != s)
        for s in scales
    ])


def extrapolate_richardson(points: list[MeasuredPoint]) -> FitResult:
    """Order L−1 Richardson extrapolation Σ_λ C_λ v_λ over all L points."""
    scales = _distinct_scales(points, 2, "Richardson")
    coefficients = richardson_coefficients(scales.tolist())
    values = np.array([p.value for p in points])
    return FitResult(mitigated=float(coefficients @ values), params=tuple(coefficients.tolist()))


def _nonpositive(points: list[MeasuredPoint]) -> FitResult | None:
    if any(p.value <= 0.0 for p in points):
        return FitResult(applicable=False, flag="nonpositive value")
    return None


def extrapolate_exponential(points: list[MeasuredPoint]) -> FitResult:
    """
    Fit log v = α + βλ and return e^α.

    With λ = {1, 3} this is v₁^{3/2} · v₃^{−1/2}.
    """
    scales = _distinct_scales(points, 2, "Exponential")
    rejected = _nonpositive(points)
    if rejected:
        return rejected
    values = np.array([p.value for p in points])
    if len(points) == 2:
        (la, lb), (va, vb) = scales, values
        mitigated = va ** (lb / (lb - la)) * vb ** (-la / (lb - la))
        rate = math.log(vb / va) / (lb - la)
    else:
        rate, log_amplitude = np.polyfit(scales, np.log(values), 1)
        mitigated = np.exp(log_amplitude)
    return FitResult(mitigated=float(mitigated), params=(float(mitigated), float(rate)))


def extrapolate_polyexp(points: list[MeasuredPoint]) -> FitResult:
    """
    Fit log v = log θ₀ + θ₁λ + θ₂λ² as a linear problem and return θ₀.

    Three points give exact interpolation; more points use least squares.
    """
    scales = _distinct_scales(points, 3, "PolyExp")
    rejected = _nonpositive(points)
    if rejected:
        return rejected
    design = np.vander(scales, 3, increasing=True)
    logs = np.log([p.value for p in points])
    if len(points) == 3:
        log_theta0, theta1, theta2 = np.linalg.solve(design, logs)
    else:
        (log_theta0, theta1, theta2), *_ = np.linalg.lstsq(design, logs, rcond=None)
    theta0 = float(np.exp(log_theta0))
    return FitResult(mitigated=theta0, params=(theta0, float(theta1), float(theta2)))


_EXTRAPOLATORS = {
    StrategyKind.LINEAR: extrapolate_linear,
    StrategyKind.RICHARDSON: extrapolate_richardson,
    StrategyKind.EXPONENTIAL: extrapolate_exponential,
    StrategyKind.POLYEXP: extrapolate_polyexp,
}


def extrapolate(kind: StrategyKind, points: list[MeasuredPoint]) -> FitResult:
    """Run one strategy on exactly the given points."""
    fit = _EXTRAPOLATORS[StrategyKind(kind)](points)
    if fit.applicable and not math.isfinite(fit.mitigated):
        return FitResult(applicable=False, flag="non-finite fit")
    return fit


# =============================================================================
# Distributions
# =============================================================================

class MitigationResult(BaseModel):
    quasi: QuasiDistribution
    flags: dict[str, BinFlag]


def mitigate_distribution(
    strategy: Strategy,
    dists: dict[float, Distribution | QuasiDistribution],
    fallback: Strategy = Strategy(kind=StrategyKind.LINEAR),
) -> MitigationResult:
    """
    Apply a strategy to every bitstring independently.

    Bins that are zero at every λ are set to 0 without extrapolating. Bins the
    strategy cannot handle (non-positive value for a log model) use the fallback.
    """
    if 1 not in dists:
        raise ValueError(f"Distributions must include the unamplified scale 1, got {sorted(dists)}")
    n_bits = {d.n_bits for d in dists.values()}
    if len(n_bits) != 1:
        raise ValueError(f"Distributions disagree on width: {sorted(n_bits)}")

    scales = sorted(dists)
    # Validate arity once up front so a missing λ fails before any bin.
    strategy.select_points([MeasuredPoint(scale=s, value=0.0) for s in scales])

    values: dict[str, float] = {}
    flags: dict[str, BinFlag] = {}
    for z in sorted(set().union(*(d.support() for d in dists.values()))):
        raw = [dists[s].get(z) for s in scales]
        if all(v == 0.0 for v in raw):
            values[z], flags[z] = 0.0, BinFlag.ALL_ZERO
            continue
        points = [MeasuredPoint(scale=s, value=v) for s, v in zip(scales, raw)]
        fit = extrapolate(strategy.kind, strategy.select_points(points))
        flag = BinFlag.OK
        if not fit.applicable:
            logger.debug("Bin %s: %s inapplicable (%s), using %s", z, strategy.name, fit.flag, fallback.name)
            fit = extrapolate(fallback.kind, fallback.select_points(points))
            flag = BinFlag.FALLBACK
            if not fit.applicable:
                raise ValueError(f"Fallback {fallback.name} is not applicable to bin {z}: {fit.flag}")
        values[z], flags[z] = fit.mitigated, flag

    return MitigationResult(
        quasi=QuasiDistribution(n_bits=n_bits.pop(), values=values),
        flags=flags,
    )


def postprocess(
    quasi: QuasiDistribution,
    mode: PostprocessMode = PostprocessMode.CLIP_RENORM,
) -> Distribution | QuasiDistribution:
    """clip_renorm: clamp to [0, 1] and renormalize; raw: pass through."""
    if PostprocessMode(mode) is PostprocessMode.RAW:
        return quasi
    clipped = {z: min(max(v, 0.0), 1.0) for z, v in quasi.values.items()}
    total = math.fsum(clipped.values())
    if total <= 0.0:
        raise ValueError("Quasi-distribution is all zero after clipping")
    probs = {z: v / total for z, v in clipped.items() if v > 0.0}
    return Distribution(n_bits=quasi.n_bits, probs=probs)
