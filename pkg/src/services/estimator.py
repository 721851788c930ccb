"""
Linear-Ansatz Estimators.

Finite-shot sampling, Monte-Carlo and direct estimation of
p_z^QEM = Σ_k c_k p_z^(k), their variance accounting, and shot allocation.

Monte-Carlo: draw term k with probability |c_k|/Γ, measure once, add sgn(c_k)
to the outcome's accumulator; p̂_z = Γ·μ_z/N. Direct: measure each term with
its own shot budget N^(k) and combine empirical distributions linearly.
"""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.services.circuits import Amplification, amplify
from src.services.distributions import (
    Counts,
    Distribution,
    QuasiDistribution,
    bitstring,
)
from src.services.simcore import Circuit, NoiseModel, output_distribution, simulate


# =============================================================================
# Models
# =============================================================================

class PreparedSource(BaseModel):
    """A noisy preparation simulated on demand: circuit at scale λ under noise."""
    model_config = ConfigDict(frozen=True)

    circuit: Circuit
    noise: NoiseModel = NoiseModel()
    scale: int = 1
    amplification: Amplification = Amplification.FOLD


class AnsatzTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    coefficient: float
    source: Distribution | PreparedSource


class LinearAnsatz(BaseModel):
    """ρ_QEM = Σ_k c_k ρ_k over noisy preparations."""
    model_config = ConfigDict(frozen=True)

    terms: tuple[AnsatzTerm, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _validate(self):
        if any(not math.isfinite(t.coefficient) for t in self.terms):
            raise ValueError("Ansatz coefficients must be finite")
        if self.gamma <= 0:
            raise ValueError("Ansatz needs at least one non-zero coefficient")
        return self

    @classmethod
    def from_distributions(cls, coefficients, dists) -> "LinearAnsatz":
        if len(coefficients) != len(dists):
            raise ValueError(f"{len(coefficients)} coefficients for {len(dists)} sources")
        return cls(terms=tuple(
            AnsatzTerm(coefficient=c, source=d) for c, d in zip(coefficients, dists)
        ))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms])

    @property
    def gamma(self) -> float:
        """Γ = Σ_k |c_k|."""
        return float(np.abs(self.coefficients).sum())

    @property
    def probabilities(self) -> np.ndarray:
        """p_k = |c_k| / Γ."""
        return np.abs(self.coefficients) / self.gamma


class ShotPlan(BaseModel):
    """Shots N^(k) per ansatz term."""
    model_config = ConfigDict(frozen=True)

    allocations: tuple[int, ...]

    @model_validator(mode="after")
    def _validate(self):
        if any(n < 0 for n in self.allocations):
            raise ValueError(f"Shot allocations must be non-negative, got {self.allocations}")
        return self

    @property
    def n_meas(self) -> int:
        return sum(self.allocations)


# =============================================================================
# Sampling
# =============================================================================

def resolve_source(source: Distribution | PreparedSource) -> Distribution:
    """Exact output distribution of a term's preparation."""
    if isinstance(source, Distribution):
        return source
    if isinstance(source, PreparedSource):
        circuit, noise = amplify(source.circuit, source.noise, source.scale, source.amplification)
        return output_distribution(simulate(circuit, noise), noise.readout_flip)
    raise ValueError(f"Unresolvable ansatz source: {type(source).__name__}")


def _support(dist: Distribution) -> tuple[list[str], np.ndarray]:
    keys = sorted(dist.probs)
    probs = np.array([dist.probs[k] for k in keys])
    return keys, probs / probs.sum()


def sample_counts(dist: Distribution, n_shots: int, seed: int) -> Counts:
    """Multinomial draw of n_shots outcomes; deterministic given seed."""
    if n_shots < 0:
        raise ValueError(f"Number of shots must be non-negative, got {n_shots}")
    if n_shots == 0 or not dist.probs:
        return Counts(n_bits=dist.n_bits, counts={}, shots=0)
    keys, probs = _support(dist)
    draws = np.random.default_rng(seed).multinomial(n_shots, probs)
    counts = {k: int(c) for k, c in zip(keys, draws) if c > 0}
    return Counts(n_bits=dist.n_bits, counts=counts, shots=n_shots)


def empirical_distribution(counts: Counts) -> Distribution:
    """p_z = count_z / total."""
    if counts.shots <= 0:
        raise ValueError("Cannot form an empirical distribution from zero shots")
    probs = {k: c / counts.shots for k, c in sorted(counts.counts.items())}
    total = math.fsum(probs.values())
    probs = {k: p / total for k, p in probs.items()}
    return Distribution(n_bits=counts.n_bits, probs=probs)


# =============================================================================
# Estimators
# =============================================================================

def mc_estimate(ansatz: LinearAnsatz, n_meas: int, seed: int) -> tuple[QuasiDistribution, float]:
    """
    Monte-Carlo estimate of p^QEM.

    Returns:
        (p̂ with p̂_z = Γ·μ_z/n_meas, Γ)
    """
    if n_meas <= 0:
        raise ValueError(f"n_meas must be positive, got {n_meas}")
    dists = [resolve_source(t.source) for t in ansatz.terms]
    n_bits = dists[0].n_bits
    gamma = ansatz.gamma
    signs = np.sign(ansatz.coefficients)

    rng = np.random.default_rng(seed)
    picks = rng.choice(len(dists), size=n_meas, p=ansatz.probabilities)
    accumulator = np.zeros(2 ** n_bits)
    for k, dist in enumerate(dists):
        rounds = int(np.count_nonzero(picks == k))
        if rounds == 0:
            continue
        keys, probs = _support(dist)
        key_index = np.array([int(key, 2) for key in keys])
        outcomes = rng.choice(len(keys), size=rounds, p=probs)
        np.add.at(accumulator, key_index[outcomes], signs[k])

    values = {
        bitstring(i, n_bits): float(gamma * accumulator[i] / n_meas)
        for i in np.flatnonzero(accumulator)
    }
    return QuasiDistribution(n_bits=n_bits, values=values), gamma


def mc_moments(ansatz: LinearAnsatz) -> tuple[QuasiDistribution, dict[str, float]]:
    """
    Exact enumeration of one Monte-Carlo round over all (k, z) pairs.

    Returns:
        (E[Γ·μ_z] per bin, Var[Γ·μ_z] per bin for a single round)
    """
    dists = [resolve_source(t.source) for t in ansatz.terms]
    n_bits = dists[0].n_bits
    gamma = ansatz.gamma
    pk = ansatz.probabilities
    signs = np.sign(ansatz.coefficients)
    keys = sorted(set().union(*(d.probs for d in dists)))

    mean: dict[str, float] = {}
    variance: dict[str, float] = {}
    for z in keys:
        first = gamma * sum(p * s * d.get(z) for p, s, d in zip(pk, signs, dists))
        second = gamma ** 2 * sum(p * d.get(z) for p, d in zip(pk, dists))
        mean[z] = float(first)
        variance[z] = float(second - first ** 2)
    return QuasiDistribution(n_bits=n_bits, values=mean), variance


def _check_plan(ansatz: LinearAnsatz, plan: ShotPlan) -> None:
    if len(plan.allocations) != len(ansatz.terms):
        raise ValueError(
            f"Shot plan has {len(plan.allocations)} entries for {len(ansatz.terms)} ansatz terms"
        )
    if any(n <= 0 for n in plan.allocations):
        raise ValueError(f"Every term needs at least one shot, got {plan.allocations}")


def direct_estimate(ansatz: LinearAnsatz, plan: ShotPlan, seed: int) -> QuasiDistribution:
    """Σ_k c_k p̂^(k) with N^(k) shots drawn from each term."""
    _check_plan(ansatz, plan)
    seeds = np.random.SeedSequence(seed).generate_state(len(ansatz.terms))
    values: dict[str, float] = {}
    n_bits = None
    for term, shots, term_seed in zip(ansatz.terms, plan.allocations, seeds):
        dist = resolve_source(term.source)
        n_bits = dist.n_bits
        empirical = empirical_distribution(sample_counts(dist, shots, int(term_seed)))
        for z, p in empirical.probs.items():
            values[z] = values.get(z, 0.0) + term.coefficient * p
    return QuasiDistribution(n_bits=n_bits, values=dict(sorted(values.items())))


def exact_combination(ansatz: LinearAnsatz) -> QuasiDistribution:
    """Infinite-shot limit Σ_k c_k p_z^(k)."""
    dists = [resolve_source(t.source) for t in ansatz.terms]
    keys = sorted(set().union(*(d.probs for d in dists)))
    values = {
        z: float(sum(t.coefficient * d.get(z) for t, d in zip(ansatz.terms, dists)))
        for z in keys
    }
    return QuasiDistribution(n_bits=dists[0].n_bits, values=values)


class DirectVariance(BaseModel):
    per_bin: dict[str, float]
    total: float
    bound: float


def variance_direct(ansatz: LinearAnsatz, plan: ShotPlan, dists: list[Distribution]) -> DirectVariance:
    """
    Var[p_z^QEM] = Σ_k c_k² (p_z^(k) − p_z^(k)²) / N^(k), summed total, and the
    bound Σ_k c_k² / N^(k).
    """
    _check_plan(ansatz, plan)
    if len(dists) != len(ansatz.terms):
        raise ValueError(f"{len(dists)} distributions for {len(ansatz.terms)} ansatz terms")
    c2 = ansatz.coefficients ** 2
    shots = np.array(plan.allocations, dtype=float)
    keys = sorted(set().union(*(d.probs for d in dists)))
    per_bin = {
        z: float(sum(c * (d.get(z) - d.get(z) ** 2) / n for c, d, n in zip(c2, dists, shots)))
        for z in keys
    }
    return DirectVariance(
        per_bin=per_bin,
        total=math.fsum(per_bin.values()),
        bound=float(np.sum(c2 / shots)),
    )


def sampling_overhead(ansatz: LinearAnsatz, plan: ShotPlan) -> tuple[float, float]:
    """(Σ_k c_k²/N^(k) for the direct estimator, Γ²/N for Monte-Carlo)."""
    _check_plan(ansatz, plan)
    direct = float(np.sum(ansatz.coefficients ** 2 / np.array(plan.allocations, dtype=float)))
    return direct, ansatz.gamma ** 2 / plan.n_meas


def optimal_shot_allocation(ansatz: LinearAnsatz, n_total: int) -> ShotPlan:
    """
    N^(k) ∝ |c_k|, rounded by largest remainder (ties to the lower term index).

    Terms rounded down to zero shots are lifted to one, taken from the largest
    allocation.
    """
    n_terms = len(ansatz.terms)
    if n_total < n_terms:
        raise ValueError(f"{n_total} shots cannot cover {n_terms} ansatz terms")

    quotas = n_total * ansatz.probabilities
    base = np.floor(quotas).astype(int)
    remainders = quotas - base
    leftover = n_total - int(base.sum())
    order = sorted(range(n_terms), key=lambda k: (-remainders[k], k))
    for k in order[:leftover]:
        base[k] += 1

    for k in range(n_terms):
        if base[k] == 0:
            base[int(np.argmax(base))] -= 1
            base[k] = 1
    return ShotPlan(allocations=tuple(int(n) for n in base))
