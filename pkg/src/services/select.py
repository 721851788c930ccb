"""
Strategy Selection.

Two data-driven ways of choosing among extrapolation strategies:

- N-version programming: compare candidate mitigated distributions pairwise by
  total variation distance and keep the one with the smallest distance sum
  (the largest sum marks the outlier).
- Consistency: re-run each strategy on every L-subset of the K measured noise
  levels and prefer the strategy whose subset results vary least. Applied per
  bitstring, each bin may end up with its own strategy.
"""
import logging
from itertools import combinations
from math import comb

import numpy as np
from pydantic import BaseModel, Field

from src.services.distributions import Distribution, QuasiDistribution
from src.services.extrapolate import (
    MIN_POINTS,
    PRECEDENCE,
    MeasuredPoint,
    PostprocessMode,
    StrategyKind,
    extrapolate,
    postprocess,
)

logger = logging.getLogger(__name__)

# Variances closer than this count as ties and fall back to precedence.
VARIANCE_TIE_TOLERANCE = 1e-18


# =============================================================================
# Total variation distance
# =============================================================================

def tvd(p: Distribution | QuasiDistribution, q: Distribution | QuasiDistribution) -> float:
    """(1/2) Σ_z |p_z − q_z| over the union of supports."""
    if p.n_bits != q.n_bits:
        raise ValueError(f"Cannot compare a {p.n_bits}-bit and a {q.n_bits}-bit distribution")
    keys = p.support() | q.support()
    distance = 0.5 * sum(abs(p.get(z) - q.get(z)) for z in keys)
    if isinstance(p, Distribution) and isinstance(q, Distribution):
        return min(distance, 1.0)
    return distance


# =============================================================================
# N-version programming
# =============================================================================

class NamedDistribution(BaseModel):
    name: str
    distribution: Distribution | QuasiDistribution


class NVReport(BaseModel):
    candidates: list[NamedDistribution]
    tvd_matrix: list[list[float]]
    row_sums: list[float]
    selected_index: int
    outlier_index: int

    @property
    def selected_name(self) -> str:
        return self.candidates[self.selected_index].name

    @property
    def outlier_name(self) -> str:
        return self.candidates[self.outlier_index].name


def nversion_select(candidates: list[NamedDistribution] | list[tuple[str, Distribution]]) -> NVReport:
    """
    Pick the candidate with the smallest summed TVD to all others.

    Ties resolve to the earliest candidate for both the pick and the outlier.
    """
    named = [
        c if isinstance(c, NamedDistribution) else NamedDistribution(name=c[0], distribution=c[1])
        for c in candidates
    ]
    if len(named) < 3:
        raise ValueError(f"N-version selection needs at least 3 candidates, got {len(named)}")

    n = len(named)
    matrix = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        matrix[i, j] = matrix[j, i] = tvd(named[i].distribution, named[j].distribution)
    row_sums = matrix.sum(axis=1)

    return NVReport(
        candidates=named,
        tvd_matrix=matrix.tolist(),
        row_sums=row_sums.tolist(),
        selected_index=int(np.argmin(row_sums)),
        outlier_index=int(np.argmax(row_sums)),
    )


# =============================================================================
# Consistency-based selection
# =============================================================================

class StrategyConsistency(BaseModel):
    kind: StrategyKind
    values: list[float] = Field(default_factory=list)
    variance: float | None = None
    applicable: bool = True
    flag: str | None = None


class ConsistencyReport(BaseModel):
    K: int
    L: int
    beta: int
    strategies: list[StrategyConsistency]
    chosen: StrategyKind

    def for_kind(self, kind: StrategyKind) -> StrategyConsistency:
        return next(s for s in self.strategies if s.kind is StrategyKind(kind))


def _validate_consistency(scales: list[float], L: int, strategies: list[StrategyKind]) -> None:
    K = len(scales)
    if len(set(scales)) != K:
        raise ValueError(f"Duplicate scale factors in {sorted(scales)}")
    if 1 not in scales:
        raise ValueError(f"Consistency selection needs the unamplified scale 1, got {sorted(scales)}")
    if not 2 <= L < K:
        raise ValueError(f"Subset size L must satisfy 2 <= L < K={K}, got {L}")
    if not strategies:
        raise ValueError("At least one strategy is required")
    for kind in strategies:
        if MIN_POINTS[StrategyKind(kind)] > L:
            raise ValueError(f"{StrategyKind(kind).value} cannot run on subsets of {L} points")


def _choose(results: list[StrategyConsistency]) -> StrategyKind:
    eligible = [r for r in results if r.applicable]
    if not eligible:
        raise ValueError("No strategy is applicable to every subset")
    best = min(r.variance for r in eligible)
    tied = [r.kind for r in eligible if r.variance <= best + VARIANCE_TIE_TOLERANCE]
    return min(tied, key=PRECEDENCE.index)


def consistency_select(
    points: list[MeasuredPoint],
    L: int,
    strategies: list[StrategyKind],
) -> ConsistencyReport:
    """
    Evaluate each strategy on all C(K, L) subsets and choose the one with the
    smallest population variance of subset results.

    A strategy inapplicable on any subset is disqualified.
    """
    ordered = sorted(points, key=lambda p: p.scale)
    _validate_consistency([p.scale for p in ordered], L, strategies)
    subsets = list(combinations(ordered, L))

    results: list[StrategyConsistency] = []
    for kind in strategies:
        kind = StrategyKind(kind)
        values: list[float] = []
        for subset in subsets:
            fit = extrapolate(kind, list(subset))
            if not fit.applicable:
                logger.debug("%s disqualified: %s", kind.value, fit.flag)
                results.append(StrategyConsistency(kind=kind, applicable=False, flag=fit.flag))
                break
            values.append(fit.mitigated)
        else:
            results.append(StrategyConsistency(
                kind=kind, values=values, variance=float(np.var(values)),
            ))

    return ConsistencyReport(
        K=len(ordered),
        L=L,
        beta=comb(len(ordered), L),
        strategies=results,
        chosen=_choose(results),
    )


class PerBinSelection(BaseModel):
    distribution: Distribution | QuasiDistribution
    quasi: QuasiDistribution
    chosen: dict[str, str]
    reports: dict[str, ConsistencyReport]


def _report_value(kind: StrategyKind, points: list[MeasuredPoint], L: int) -> float:
    """Mitigated value from all K points; Richardson uses the L smallest λ."""
    ordered = sorted(points, key=lambda p: p.scale)
    subset = ordered[:L] if kind is StrategyKind.RICHARDSON else ordered
    fit = extrapolate(kind, subset)
    if not fit.applicable:
        raise ValueError(f"{kind.value} full-data fit is not applicable: {fit.flag}")
    return fit.mitigated


def consistency_select_per_bin(
    dists: dict[float, Distribution | QuasiDistribution],
    L: int,
    strategies: list[StrategyKind],
    report_value: str = "full_fit",
    mode: PostprocessMode = PostprocessMode.CLIP_RENORM,
) -> PerBinSelection:
    """
    Run consistency selection independently for every bitstring.

    Bins that are zero at every λ bypass selection and are tagged "none".
    The assembled values are postprocessed (clip_renorm by default).
    """
    if report_value not in ("full_fit", "subset_mean"):
        raise ValueError(f"report_value must be full_fit or subset_mean, got {report_value!r}")
    widths = {d.n_bits for d in dists.values()}
    if len(widths) != 1:
        raise ValueError(f"Distributions disagree on width: {sorted(widths)}")
    scales = sorted(dists)
    _validate_consistency(scales, L, strategies)

    values: dict[str, float] = {}
    chosen: dict[str, str] = {}
    reports: dict[str, ConsistencyReport] = {}
    for z in sorted(set().union(*(d.support() for d in dists.values()))):
        raw = [dists[s].get(z) for s in scales]
        if all(v == 0.0 for v in raw):
            values[z], chosen[z] = 0.0, "none"
            continue
        points = [MeasuredPoint(scale=s, value=v) for s, v in zip(scales, raw)]
        report = consistency_select(points, L, strategies)
        reports[z] = report
        chosen[z] = report.chosen.value
        if report_value == "subset_mean":
            values[z] = float(np.mean(report.for_kind(report.chosen).values))
        else:
            values[z] = _report_value(report.chosen, points, L)

    quasi = QuasiDistribution(n_bits=widths.pop(), values=values)
    return PerBinSelection(
        distribution=postprocess(quasi, mode),
        quasi=quasi,
        chosen=chosen,
        reports=reports,
    )
