"""
Experiment Harness.

Runs the mitigation ranking experiment over a (J, B, M) grid:

1. Build the Trotterized TFI circuit and simulate it noiselessly (ideal).
2. For each scale factor λ, amplify the noise (folding or rate scaling) and
   simulate; optionally replace the exact distribution by a finite-shot sample.
3. Mitigate with every configured strategy, run N-version selection over the
   strategy outputs and per-bin consistency selection.
4. Rank all candidates by TVD to the ideal distribution.
"""
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path

import fnc
import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.services.circuits import Amplification, Boundary, TFIParams, amplify, build_trotter_tfi
from src.services.distributions import Distribution, QuasiDistribution
from src.services.estimator import empirical_distribution, sample_counts
from src.services.extrapolate import (
    MIN_POINTS,
    PRECEDENCE,
    BinFlag,
    PostprocessMode,
    Strategy,
    StrategyKind,
    mitigate_distribution,
    postprocess,
)
from src.services.select import (
    NamedDistribution,
    NVReport,
    consistency_select_per_bin,
    nversion_select,
    tvd,
)
from src.services.simcore import NoiseModel, output_distribution, simulate

logger = logging.getLogger(__name__)

CONSISTENCY = "consistency"
NVERSION = "nversion"


class ShotMode(str, Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


class Preset(str, Enum):
    NVERSION_EXPERIMENT = "nversion_experiment"
    CONSISTENCY_EXPERIMENT = "consistency_experiment"


def method_order(name: str) -> int:
    """Sort key: strategies by precedence, then the consistency candidate, then the N-version pick."""
    names = [k.value for k in PRECEDENCE] + [CONSISTENCY, NVERSION]
    return names.index(name) if name in names else len(names)


# =============================================================================
# Configuration
# =============================================================================

class ExperimentConfig(BaseModel):
    """
    Sweep configuration.

    Defaults are desk scale (N_Q=5, J,B ∈ 1…4, M ∈ {5, 10}); `full_scale()`
    gives the 10-qubit, 10×10 grid with M ∈ 5…10.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_qubits: int = Field(5, ge=2)
    n_meas: int = Field(5000, ge=1, description="Shots per circuit per scale factor")
    t: float = Field(1.0, gt=0.0)
    J_values: list[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    B_values: list[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    M_values: list[int] = Field(default_factory=lambda: [5, 10])
    scale_factors: list[int] = Field(default_factory=lambda: [1, 3, 5])
    noise: NoiseModel = NoiseModel()
    amplification: Amplification = Amplification.FOLD
    subset_size: int = Field(2, ge=2, description="Consistency subset size L")
    strategies: list[StrategyKind] = Field(default_factory=lambda: list(PRECEDENCE))
    consistency_strategies: list[StrategyKind] = Field(
        default_factory=lambda: [StrategyKind.LINEAR, StrategyKind.RICHARDSON, StrategyKind.EXPONENTIAL]
    )
    include_consistency_candidate: bool = True
    report_value: str = Field("full_fit", pattern="^(full_fit|subset_mean)$")
    postprocess: PostprocessMode = PostprocessMode.CLIP_RENORM
    master_seed: int = 0
    boundary: Boundary = Boundary.OPEN
    shot_mode: ShotMode = ShotMode.EXACT
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _validate(self):
        for name in ("J_values", "B_values", "M_values", "scale_factors"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        scales = self.scale_factors
        if scales[0] != 1 or any(s % 2 == 0 for s in scales) or sorted(set(scales)) != scales:
            raise ValueError(f"Scale factors must be odd, strictly ascending and start at 1, got {scales}")
        if len(self.strategies) < 3:
            raise ValueError("N-version selection needs at least 3 strategies")
        if self.subset_size >= len(scales):
            raise ValueError(f"Subset size {self.subset_size} must be below the number of scale factors")
        for kind in self.consistency_strategies:
            if MIN_POINTS[kind] > self.subset_size:
                raise ValueError(f"{kind.value} cannot run on consistency subsets of {self.subset_size} points")
        return self

    @classmethod
    def full_scale(cls, **overrides) -> "ExperimentConfig":
        values = dict(
            n_qubits=10,
            J_values=[float(j) for j in range(1, 11)],
            B_values=[float(b) for b in range(1, 11)],
            M_values=list(range(5, 11)),
        )
        return cls(**{**values, **overrides})

    @classmethod
    def preset(cls, name: Preset | str, full_scale: bool = False, **overrides) -> "ExperimentConfig":
        """
        nversion_experiment ranks the four strategies and tracks the N-version pick;
        consistency_experiment ranks three strategies plus the consistency output.
        """
        if Preset(name) is Preset.NVERSION_EXPERIMENT:
            values = dict(strategies=list(PRECEDENCE), include_consistency_candidate=False)
        else:
            values = dict(
                strategies=[StrategyKind.LINEAR, StrategyKind.RICHARDSON, StrategyKind.EXPONENTIAL],
                include_consistency_candidate=True,
            )
        values.update(overrides)
        return cls.full_scale(**values) if full_scale else cls(**values)

    @classmethod
    def from_yaml(cls, path: str | Path, **overrides) -> "ExperimentConfig":
        """Load a YAML key/value file; unknown keys are rejected."""
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ValueError(f"Config file {path} must contain a key/value mapping")
        return cls.model_validate({**data, **overrides})

    def grid(self) -> list[tuple[float, float, int]]:
        return [(J, B, M) for M in self.M_values for J in self.J_values for B in self.B_values]

    def fingerprint(self) -> str:
        payload = self.model_dump_json(exclude={"workers"})
        return hashlib.blake2b(payload.encode(), digest_size=12).hexdigest()


def run_seed(master_seed: int, J: float, B: float, M: int) -> int:
    """Per-run seed: 64-bit BLAKE2b of "master|J|B|M" (floats in repr form)."""
    key = f"{master_seed}|{float(J)!r}|{float(B)!r}|{int(M)}"
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


# =============================================================================
# Records
# =============================================================================

class CandidateResult(BaseModel):
    name: str
    distribution: Distribution | QuasiDistribution
    tvd: float
    rank: int = 0


class RunRecord(BaseModel):
    J: float
    B: float
    M: int
    seed: int
    ideal: Distribution
    noisy: dict[int, Distribution]
    candidates: list[CandidateResult]
    fallback_bins: dict[str, int] = Field(default_factory=dict)
    nversion: NVReport
    nversion_rank: int
    consistency_choices: dict[str, str]

    @property
    def key(self) -> tuple[float, float, int]:
        return (self.J, self.B, self.M)

    def rank_of(self, name: str) -> int:
        return fnc.find(lambda c: c.name == name, self.candidates).rank


class RankSummary(BaseModel):
    """Place counts across runs for one Trotter number M."""
    M: int
    runs: int
    places: dict[str, list[int]]
    nversion_places: list[int]


def assign_ranks(candidates: list[CandidateResult]) -> list[CandidateResult]:
    """Rank by TVD ascending; equal TVDs keep candidate order."""
    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].tvd, i))
    ranks = {i: r + 1 for r, i in enumerate(order)}
    return [c.model_copy(update={"rank": ranks[i]}) for i, c in enumerate(candidates)]


# =============================================================================
# Runs
# =============================================================================

def noisy_distributions(
    config: ExperimentConfig, params: TFIParams, seed: int
) -> dict[int, Distribution]:
    """Per-λ output distributions (exact, or sampled with n_meas shots)."""
    circuit = build_trotter_tfi(params)
    shot_seeds = np.random.SeedSequence(seed).generate_state(len(config.scale_factors))
    noisy: dict[int, Distribution] = {}
    for scale, shot_seed in zip(config.scale_factors, shot_seeds):
        amplified, noise = amplify(circuit, config.noise, scale, config.amplification)
        dist = output_distribution(simulate(amplified, noise), noise.readout_flip)
        if config.shot_mode is ShotMode.SAMPLED:
            dist = empirical_distribution(sample_counts(dist, config.n_meas, int(shot_seed)))
        noisy[scale] = dist
    return noisy


def run_single(config: ExperimentConfig, J: float, B: float, M: int, seed: int) -> RunRecord:
    """One (J, B, M) experiment: simulate, mitigate, select, rank."""
    params = TFIParams(n_qubits=config.n_qubits, J=J, B=B, t=config.t, M=M, boundary=config.boundary)
    ideal = output_distribution(simulate(build_trotter_tfi(params), NoiseModel.noiseless()))
    noisy = noisy_distributions(config, params, seed)

    candidates: list[CandidateResult] = []
    fallback_bins: dict[str, int] = {}
    for kind in config.strategies:
        result = mitigate_distribution(Strategy(kind=kind), noisy)
        dist = postprocess(result.quasi, config.postprocess)
        fallback_bins[kind.value] = sum(1 for f in result.flags.values() if f is BinFlag.FALLBACK)
        candidates.append(CandidateResult(name=kind.value, distribution=dist, tvd=tvd(dist, ideal)))

    nversion = nversion_select([
        NamedDistribution(name=c.name, distribution=c.distribution) for c in candidates
    ])

    consistency = consistency_select_per_bin(
        noisy,
        config.subset_size,
        config.consistency_strategies,
        report_value=config.report_value,
        mode=config.postprocess,
    )
    if config.include_consistency_candidate:
        candidates.append(CandidateResult(
            name=CONSISTENCY,
            distribution=consistency.distribution,
            tvd=tvd(consistency.distribution, ideal),
        ))

    candidates = assign_ranks(candidates)
    nversion_rank = fnc.find(lambda c: c.name == nversion.selected_name, candidates).rank
    logger.debug("Run J=%s B=%s M=%s: N-version picked %s (rank %d)", J, B, M, nversion.selected_name, nversion_rank)

    return RunRecord(
        J=J, B=B, M=M, seed=seed,
        ideal=ideal,
        noisy=noisy,
        candidates=candidates,
        fallback_bins=fallback_bins,
        nversion=nversion,
        nversion_rank=nversion_rank,
        consistency_choices=consistency.chosen,
    )


def _run_job(job: tuple[ExperimentConfig, float, float, int]) -> RunRecord:
    config, J, B, M = job
    return run_single(config, J, B, M, run_seed(config.master_seed, J, B, M))


def summarize(records: list[RunRecord]) -> list[RankSummary]:
    """Place counts per method and the N-version pick's rank histogram, per M."""
    if not records:
        raise ValueError("Cannot summarize an empty record list")
    summaries = []
    for M, group in sorted(fnc.groupby(lambda r: r.M, records).items()):
        n_candidates = len(group[0].candidates)
        places: dict[str, list[int]] = {}
        nversion_places = [0] * n_candidates
        for record in group:
            for candidate in record.candidates:
                places.setdefault(candidate.name, [0] * n_candidates)[candidate.rank - 1] += 1
            nversion_places[record.nversion_rank - 1] += 1
        places = dict(sorted(places.items(), key=lambda kv: method_order(kv[0])))
        summaries.append(RankSummary(M=M, runs=len(group), places=places, nversion_places=nversion_places))
    return summaries


class SweepResult(BaseModel):
    records: list[RunRecord]
    summaries: list[RankSummary]


def run_sweep(config: ExperimentConfig, cache=None) -> SweepResult:
    """
    Run every (J, B, M) in the grid and aggregate rank summaries.

    Records are sorted by (J, B, M) before aggregation, so worker count and
    completion order never change the output.

    Args:
        config: Sweep configuration
        cache: Optional RunCache; hits skip simulation
    """
    grid = config.grid()
    logger.info("Sweep of %d runs on %d qubits (%s, %s)", len(grid), config.n_qubits,
                config.amplification.value, config.shot_mode.value)

    records: list[RunRecord] = []
    pending = []
    for J, B, M in grid:
        cached = cache.get(config, J, B, M) if cache else None
        if cached is not None:
            records.append(cached)
        else:
            pending.append((config, J, B, M))

    if config.workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            computed = list(pool.map(_run_job, pending))
    else:
        computed = [_run_job(job) for job in pending]

    if cache:
        for record in computed:
            cache.put(config, record)
    records += computed

    records = fnc.sortby(lambda r: r.key, records)
    return SweepResult(records=records, summaries=summarize(records))
