"""
Tests for strategy selection: TVD, N-version programming and consistency.
"""
import math

import numpy as np
import pytest

from src.services.distributions import Distribution, QuasiDistribution
from src.services.extrapolate import MeasuredPoint, PostprocessMode, StrategyKind
from src.services.select import (
    NamedDistribution,
    consistency_select,
    consistency_select_per_bin,
    nversion_select,
    tvd,
)

CLOSED_FORMS = [StrategyKind.LINEAR, StrategyKind.RICHARDSON, StrategyKind.EXPONENTIAL]


def _points(fn, scales=(1, 2, 3, 4)):
    return [MeasuredPoint(scale=s, value=fn(s)) for s in scales]


class TestTVD:

    def test_identity(self):
        p = Distribution(n_bits=1, probs={"0": 0.3, "1": 0.7})
        assert tvd(p, p) == 0.0

    def test_disjoint(self):
        p = Distribution(n_bits=1, probs={"0": 1.0})
        q = Distribution(n_bits=1, probs={"1": 1.0})
        assert tvd(p, q) == 1.0

    def test_value(self):
        p = Distribution(n_bits=1, probs={"0": 0.7, "1": 0.3})
        q = Distribution(n_bits=1, probs={"0": 0.5, "1": 0.5})
        assert tvd(p, q) == pytest.approx(0.2, abs=1e-15)

    def test_width_mismatch(self):
        with pytest.raises(ValueError, match="bit"):
            tvd(Distribution(n_bits=1, probs={"0": 1.0}), Distribution(n_bits=2, probs={"00": 1.0}))

    def test_quasi_distance_not_clamped(self):
        p = QuasiDistribution(n_bits=1, values={"0": 1.5, "1": -0.5})
        q = Distribution(n_bits=1, probs={"1": 1.0})
        assert tvd(p, q) == pytest.approx(1.5)


class TestNVersion:
    """
    N-version programming over candidate mitigated distributions.

    Why: The pick must be the candidate that agrees most with the others, so
    a single diverging strategy cannot be selected.
    """

    @pytest.fixture
    def base(self):
        return Distribution(n_bits=1, probs={"0": 1.0})

    def test_distant_candidate_is_outlier(self, base):
        far = Distribution(n_bits=1, probs={"0": 0.5, "1": 0.5})
        report = nversion_select([("a", base), ("b", base), ("c", base), ("d", far)])
        assert report.row_sums == pytest.approx([0.5, 0.5, 0.5, 1.5])
        assert report.outlier_name == "d"
        assert report.selected_name in {"a", "b", "c"}

    def test_all_identical_picks_first(self, base):
        report = nversion_select([("a", base), ("b", base), ("c", base)])
        assert report.selected_index == 0

    def test_too_few_candidates(self, base):
        with pytest.raises(ValueError, match="at least 3"):
            nversion_select([("a", base), ("b", base)])

    def test_matrix_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(4)
        candidates = [
            NamedDistribution(name=str(i), distribution=Distribution.from_vector(rng.dirichlet(np.ones(4)), 2))
            for i in range(5)
        ]
        matrix = np.array(nversion_select(candidates).tvd_matrix)
        assert np.array_equal(matrix, matrix.T)
        assert np.all(np.diag(matrix) == 0.0)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(12)
        named = [
            (f"s{i}", Distribution.from_vector(rng.dirichlet(np.ones(8)), 3))
            for i in range(4)
        ]
        report = nversion_select(named)
        for perm in ([3, 2, 1, 0], [1, 3, 0, 2]):
            permuted = nversion_select([named[i] for i in perm])
            assert permuted.selected_name == report.selected_name
            assert permuted.outlier_name == report.outlier_name

    def test_selected_never_outlier_for_clusters(self, base):
        close = Distribution(n_bits=1, probs={"0": 0.95, "1": 0.05})
        far = Distribution(n_bits=1, probs={"1": 1.0})
        report = nversion_select([("a", base), ("b", close), ("c", base), ("d", far)])
        assert report.selected_index != report.outlier_index


class TestConsistency:

    def test_exponential_data_picks_exponential(self):
        report = consistency_select(_points(lambda s: 0.9 * 0.8 ** s), 2, CLOSED_FORMS)
        assert report.beta == math.comb(4, 2)
        assert report.for_kind(StrategyKind.EXPONENTIAL).variance <= 1e-18
        assert report.for_kind(StrategyKind.LINEAR).variance > 0
        assert report.chosen is StrategyKind.EXPONENTIAL

    def test_linear_data_picks_linear(self):
        report = consistency_select(_points(lambda s: 0.7 - 0.05 * s), 2, CLOSED_FORMS)
        assert report.for_kind(StrategyKind.LINEAR).variance <= 1e-18
        assert report.chosen is StrategyKind.LINEAR

    def test_constant_data_ties_to_linear(self):
        report = consistency_select(_points(lambda s: 0.25), 2, CLOSED_FORMS)
        assert report.chosen is StrategyKind.LINEAR

    def test_inapplicable_strategy_disqualified(self):
        """Exponential fails on the subset containing a zero, so it cannot win."""
        values = {1: 0.3, 2: 0.2, 3: 0.1, 4: 0.0}
        report = consistency_select(_points(values.get), 2, CLOSED_FORMS)
        exponential = report.for_kind(StrategyKind.EXPONENTIAL)
        assert not exponential.applicable
        assert report.chosen is StrategyKind.LINEAR

    def test_order_invariant(self):
        points = _points(lambda s: 0.5 * math.exp(-0.1 * s) + 0.01 * s)
        forward = consistency_select(points, 2, CLOSED_FORMS)
        backward = consistency_select(list(reversed(points)), 2, CLOSED_FORMS)
        assert forward.chosen is backward.chosen
        for kind in CLOSED_FORMS:
            assert forward.for_kind(kind).variance == pytest.approx(backward.for_kind(kind).variance, abs=1e-18)

    @pytest.mark.parametrize("L", [1, 4, 5])
    def test_subset_size_out_of_range(self, L):
        with pytest.raises(ValueError, match="Subset size"):
            consistency_select(_points(lambda s: 0.5), L, CLOSED_FORMS)

    def test_requires_unamplified_scale(self):
        with pytest.raises(ValueError, match="unamplified"):
            consistency_select(_points(lambda s: 0.5, scales=(3, 5, 7)), 2, CLOSED_FORMS)

    def test_polyexp_needs_three_point_subsets(self):
        with pytest.raises(ValueError, match="polyexp"):
            consistency_select(_points(lambda s: 0.5), 2, [StrategyKind.POLYEXP])

    def test_no_applicable_strategy(self):
        values = {1: 0.3, 2: 0.0, 3: 0.1, 4: 0.2}
        with pytest.raises(ValueError, match="No strategy"):
            consistency_select(_points(values.get), 2, [StrategyKind.EXPONENTIAL])


class TestConsistencyPerBin:

    def test_exponential_bins_recover_truth(self):
        """
        Test: Bins that decay exactly exponentially all pick Exponential.

        Why: With exact inputs the selected strategy must reproduce the λ→0
        value, otherwise the per-bin protocol adds bias of its own.
        """
        truth = {"00": 0.4, "01": 0.3, "10": 0.2, "11": 0.1}
        rates = {"00": 0.3, "01": 0.1, "10": 0.2, "11": 0.05}
        dists = {
            s: QuasiDistribution(n_bits=2, values={z: a * math.exp(-rates[z] * s) for z, a in truth.items()})
            for s in (1, 3, 5)
        }
        selection = consistency_select_per_bin(dists, 2, CLOSED_FORMS, mode=PostprocessMode.RAW)
        assert set(selection.chosen.values()) == {"exponential"}
        for z, a in truth.items():
            assert selection.quasi.get(z) == pytest.approx(a, abs=1e-9)

    def test_all_zero_bin(self):
        dists = {
            s: QuasiDistribution(n_bits=1, values={"0": 1.0, "1": 0.0})
            for s in (1, 3, 5)
        }
        selection = consistency_select_per_bin(dists, 2, CLOSED_FORMS)
        assert selection.chosen["1"] == "none"
        assert selection.quasi.get("1") == 0.0
        assert "1" not in selection.reports

    def test_point_mass(self):
        dists = {s: Distribution(n_bits=2, probs={"01": 1.0}) for s in (1, 3, 5)}
        selection = consistency_select_per_bin(dists, 2, CLOSED_FORMS)
        assert selection.distribution.probs == pytest.approx({"01": 1.0})

    def test_subset_mean_reporting(self):
        dists = {
            s: QuasiDistribution(n_bits=1, values={"0": 0.6 - 0.02 * s, "1": 0.4 + 0.02 * s})
            for s in (1, 3, 5)
        }
        selection = consistency_select_per_bin(
            dists, 2, CLOSED_FORMS, report_value="subset_mean", mode=PostprocessMode.RAW,
        )
        assert selection.quasi.get("0") == pytest.approx(0.6, abs=1e-12)

    def test_invalid_report_value(self):
        dists = {s: Distribution(n_bits=1, probs={"0": 1.0}) for s in (1, 3, 5)}
        with pytest.raises(ValueError, match="report_value"):
            consistency_select_per_bin(dists, 2, CLOSED_FORMS, report_value="median")
