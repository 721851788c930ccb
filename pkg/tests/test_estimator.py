"""
Tests for the linear-ansatz estimators.

The Monte-Carlo and direct estimators must be unbiased for Σ_k c_k p^(k),
and their variance accounting must honour the Γ²/N_meas bound.
"""
import math

import numpy as np
import pytest

from src.services.circuits import TFIParams, build_trotter_tfi
from src.services.distributions import Counts, Distribution
from src.services.estimator import (
    LinearAnsatz,
    PreparedSource,
    ShotPlan,
    direct_estimate,
    empirical_distribution,
    exact_combination,
    mc_estimate,
    mc_moments,
    optimal_shot_allocation,
    resolve_source,
    sample_counts,
    sampling_overhead,
    variance_direct,
)
from src.services.select import tvd
from src.services.simcore import NoiseModel


@pytest.fixture
def d1():
    return Distribution(n_bits=1, probs={"0": 0.8, "1": 0.2})


@pytest.fixture
def d2():
    return Distribution(n_bits=1, probs={"0": 0.6, "1": 0.4})


@pytest.fixture
def linear_ansatz(d1, d2):
    """Two-point linear extrapolation from λ = 1, 3."""
    return LinearAnsatz.from_distributions([1.5, -0.5], [d1, d2])


class TestSampling:

    def test_point_mass(self):
        counts = sample_counts(Distribution(n_bits=1, probs={"0": 1.0}), 100, seed=1)
        assert counts.counts == {"0": 100}

    def test_zero_shots(self):
        counts = sample_counts(Distribution(n_bits=1, probs={"0": 1.0}), 0, seed=1)
        assert counts.counts == {} and counts.shots == 0

    def test_uniform_concentration(self):
        counts = sample_counts(Distribution(n_bits=1, probs={"0": 0.5, "1": 0.5}), 10**6, seed=3)
        for key in ("0", "1"):
            assert abs(counts.counts[key] - 500_000) <= 5 * 500

    def test_same_seed_same_counts(self):
        dist = Distribution(n_bits=2, probs={"00": 0.1, "01": 0.2, "10": 0.3, "11": 0.4})
        assert sample_counts(dist, 1000, seed=42) == sample_counts(dist, 1000, seed=42)

    def test_empirical_ratio(self):
        dist = empirical_distribution(Counts(n_bits=1, counts={"0": 3, "1": 1}, shots=4))
        assert dist.probs == {"0": 0.75, "1": 0.25}

    def test_empirical_point_mass(self):
        dist = empirical_distribution(Counts(n_bits=2, counts={"10": 7}, shots=7))
        assert dist.probs == {"10": 1.0}

    def test_empirical_sums_to_one(self):
        rng = np.random.default_rng(13)
        keys = [f"{i:03b}" for i in range(8)]
        for _ in range(100):
            draws = rng.integers(0, 50, size=8)
            draws[0] += 1
            counts = Counts(n_bits=3, counts={k: int(c) for k, c in zip(keys, draws) if c}, shots=int(draws.sum()))
            probs = empirical_distribution(counts).probs
            assert abs(math.fsum(probs.values()) - 1.0) <= 4e-16

    def test_empirical_zero_shots(self):
        with pytest.raises(ValueError, match="zero shots"):
            empirical_distribution(Counts(n_bits=1, counts={}, shots=0))

    def test_sample_round_trip(self):
        dist = Distribution(n_bits=3, probs={
            "000": 0.3, "001": 0.05, "010": 0.1, "011": 0.15,
            "100": 0.05, "101": 0.2, "110": 0.1, "111": 0.05,
        })
        assert tvd(empirical_distribution(sample_counts(dist, 10**7, seed=11)), dist) < 0.002


class TestLinearAnsatz:

    def test_gamma_and_probabilities(self, linear_ansatz):
        assert linear_ansatz.gamma == 2.0
        assert linear_ansatz.probabilities.tolist() == [0.75, 0.25]

    def test_rejects_all_zero_coefficients(self, d1):
        with pytest.raises(ValueError):
            LinearAnsatz.from_distributions([0.0], [d1])

    def test_prepared_source_resolves_to_simulation(self):
        circuit = build_trotter_tfi(TFIParams(n_qubits=2, M=2))
        source = PreparedSource(circuit=circuit, noise=NoiseModel.noiseless())
        dist = resolve_source(source)
        assert dist.n_bits == 2
        assert sum(dist.probs.values()) == pytest.approx(1.0)


class TestMonteCarlo:
    """
    Monte-Carlo estimator: pick term k with probability |c_k|/Γ.

    Why: It is the reference estimator whose overhead Γ² the direct
    estimator is compared against.
    """

    def test_single_term_is_plain_sampling(self, d1):
        ansatz = LinearAnsatz.from_distributions([1.0], [d1])
        estimate, gamma = mc_estimate(ansatz, 10_000, seed=5)
        assert gamma == 1.0
        assert sum(estimate.values.values()) == pytest.approx(1.0)
        assert estimate.get("0") == pytest.approx(0.8, abs=5 * math.sqrt(0.16 / 10_000))

    def test_linear_oracle(self, linear_ansatz):
        n_meas = 10**5
        estimate, gamma = mc_estimate(linear_ansatz, n_meas, seed=9)
        assert gamma == 2.0
        assert estimate.get("0") == pytest.approx(0.9, abs=5 * gamma / math.sqrt(n_meas))

    def test_rejects_non_positive_rounds(self, linear_ansatz):
        with pytest.raises(ValueError):
            mc_estimate(linear_ansatz, 0, seed=0)

    def test_moments_are_exact(self, linear_ansatz):
        mean, variance = mc_moments(linear_ansatz)
        assert mean.get("0") == pytest.approx(0.9, abs=1e-15)
        assert mean.get("1") == pytest.approx(0.1, abs=1e-15)
        assert sum(variance.values()) <= linear_ansatz.gamma ** 2


class TestDirect:

    def test_single_term_is_empirical(self, d1):
        ansatz = LinearAnsatz.from_distributions([1.0], [d1])
        estimate = direct_estimate(ansatz, ShotPlan(allocations=(500,)), seed=4)
        assert sum(estimate.values.values()) == pytest.approx(1.0)
        assert all(0.0 <= v <= 1.0 for v in estimate.values.values())

    def test_exact_limit(self, linear_ansatz):
        exact = exact_combination(linear_ansatz)
        assert exact.get("0") == pytest.approx(0.9, abs=1e-15)
        assert exact.get("1") == pytest.approx(0.1, abs=1e-15)

    def test_plan_length_mismatch(self, linear_ansatz):
        with pytest.raises(ValueError, match="entries"):
            direct_estimate(linear_ansatz, ShotPlan(allocations=(100,)), seed=0)

    def test_converges_to_exact(self, linear_ansatz):
        estimate = direct_estimate(linear_ansatz, ShotPlan(allocations=(75_000, 25_000)), seed=2)
        assert estimate.get("0") == pytest.approx(0.9, abs=5 * math.sqrt(8e-5))


class TestVarianceDirect:

    def test_point_masses(self):
        point = Distribution(n_bits=1, probs={"1": 1.0})
        ansatz = LinearAnsatz.from_distributions([1.5, -0.5], [point, point])
        variance = variance_direct(ansatz, ShotPlan(allocations=(10, 10)), [point, point])
        assert variance.total == 0.0

    def test_uniform_single_term(self):
        uniform = Distribution(n_bits=1, probs={"0": 0.5, "1": 0.5})
        ansatz = LinearAnsatz.from_distributions([1.0], [uniform])
        variance = variance_direct(ansatz, ShotPlan(allocations=(100,)), [uniform])
        assert variance.per_bin == pytest.approx({"0": 0.0025, "1": 0.0025})
        assert variance.total == pytest.approx(0.005)
        assert variance.bound == pytest.approx(0.01)

    def test_total_below_bound(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n_terms = int(rng.integers(1, 5))
            dists = [
                Distribution.from_vector(rng.dirichlet(np.ones(4)), 2)
                for _ in range(n_terms)
            ]
            ansatz = LinearAnsatz.from_distributions(rng.normal(size=n_terms).tolist(), dists)
            plan = ShotPlan(allocations=tuple(int(n) for n in rng.integers(1, 1000, size=n_terms)))
            variance = variance_direct(ansatz, plan, dists)
            assert variance.total <= variance.bound + 1e-15


class TestAllocation:

    def test_single_term(self, d1):
        plan = optimal_shot_allocation(LinearAnsatz.from_distributions([1.0], [d1]), 777)
        assert plan.allocations == (777,)

    def test_linear_coefficients(self, linear_ansatz):
        plan = optimal_shot_allocation(linear_ansatz, 5000)
        assert plan.allocations == (3750, 1250)
        direct, mc = sampling_overhead(linear_ansatz, plan)
        assert direct == pytest.approx(8e-4, abs=1e-15)
        assert mc == pytest.approx(8e-4, abs=1e-15)

    def test_equal_coefficients_split_evenly(self, d1, d2):
        ansatz = LinearAnsatz.from_distributions([1.0, -1.0, 1.0], [d1, d2, d1])
        plan = optimal_shot_allocation(ansatz, 1000)
        assert sum(plan.allocations) == 1000
        assert max(plan.allocations) - min(plan.allocations) <= 1

    def test_every_term_gets_a_shot(self, d1, d2):
        ansatz = LinearAnsatz.from_distributions([1000.0, 0.001], [d1, d2])
        plan = optimal_shot_allocation(ansatz, 10)
        assert plan.allocations == (9, 1)

    def test_too_few_shots(self, linear_ansatz):
        with pytest.raises(ValueError, match="cannot cover"):
            optimal_shot_allocation(linear_ansatz, 1)

    def test_direct_overhead_never_below_mc(self, linear_ansatz):
        """Σ c_k²/N^(k) ≥ Γ²/N for any plan, with equality at the optimum."""
        for allocations in [(2500, 2500), (4000, 1000), (3000, 2000)]:
            direct, mc = sampling_overhead(linear_ansatz, ShotPlan(allocations=allocations))
            assert direct >= mc

    def test_optimal_plan_dominates(self, d1, d2):
        """
        Test: No plan with the same shot total beats the optimal allocation.

        Why: N^(k) ∝ |c_k| minimises Σ c_k²/N^(k); only integer rounding may
        leave it slightly above the Γ²/N floor that every plan respects.
        """
        rng = np.random.default_rng(21)
        n_total = 100_000
        for _ in range(50):
            n_terms = int(rng.integers(2, 5))
            signs = rng.choice([-1.0, 1.0], size=n_terms)
            coefficients = (signs * rng.uniform(0.1, 1.0, size=n_terms)).tolist()
            ansatz = LinearAnsatz.from_distributions(coefficients, [d1, d2, d1, d2][:n_terms])
            optimal, floor = sampling_overhead(ansatz, optimal_shot_allocation(ansatz, n_total))
            assert optimal <= floor * (1 + 1e-3)
            for _ in range(20):
                split = rng.multinomial(n_total - n_terms, rng.dirichlet(np.ones(n_terms))) + 1
                other, _ = sampling_overhead(ansatz, ShotPlan(allocations=tuple(int(n) for n in split)))
                assert other >= floor * (1 - 1e-12)
                assert optimal <= other * (1 + 1e-3)
