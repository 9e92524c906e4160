"""Consistency scoring tests: spread oracles, Kendall baselines, assembly."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from thckit.consistency import (
    AssemblyOptions,
    IntervalSource,
    PtpNormalization,
    RankProfile,
    TransferSetup,
    assemble_profiles,
    build_consistency_report,
    kendall_tau_matrix,
    kendall_w,
    mean_pairwise_tau,
    normalized_ptp,
    ptp,
    rank_context,
    thc,
)
from thckit.dataset import EmptySliceError

from conftest import dataset_from_intervals, reference_trajectory_cells


def profile(matrix, name="hp") -> RankProfile:
    matrix = np.asarray(matrix, dtype=float)
    return RankProfile(
        name,
        tuple(f"v{i}" for i in range(matrix.shape[0])),
        tuple(f"c{j}" for j in range(matrix.shape[1])),
        matrix,
    )


# The four reference rank trajectories with hand-checked scores.
TRAJECTORY_A1 = [[1, 1, 2, 1, 3], [2, 3, 2, 3, 2], [3, 2, 2, 2, 1]]
TRAJECTORY_B1 = [[1, 2, 1, 2, 1], [2, 1, 2, 1, 2], [3, 3, 3, 3, 3]]
TRAJECTORY_A2 = [[1, 1, 1, 3], [2, 2, 2, 2], [3, 3, 3, 1], [4, 4, 4, 4]]
TRAJECTORY_B2 = [[1, 1, 1, 1], [2.5, 2, 3, 2], [2.5, 3, 2, 3]]


class TestPtp:
    def test_peak_to_peak(self):
        assert ptp([1, 1, 2, 1, 3]) == 2.0
        assert ptp([2.5, 2, 3, 2]) == 1.0
        assert ptp([4.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ptp([])


class TestNormalizedPtp:
    def test_reference_vectors(self):
        assert normalized_ptp([2, 1, 2], m=3) == [1.0, 0.5, 1.0]
        assert normalized_ptp([1, 1, 0], m=3) == [0.5, 0.5, 0.0]
        assert normalized_ptp([2, 0, 2, 0], m=4) == [2 / 3, 0.0, 2 / 3, 0.0]

    def test_all_zero(self):
        assert normalized_ptp([0, 0, 0], m=3) == [0.0, 0.0, 0.0]

    def test_single_value_scores_zero(self):
        assert normalized_ptp([0.0], m=1) == [0.0]

    def test_sum_mode(self):
        assert normalized_ptp([2, 1, 2], m=3, mode=PtpNormalization.SUM) == [0.4, 0.2, 0.4]
        assert normalized_ptp([0, 0], m=2, mode=PtpNormalization.SUM) == [0.0, 0.0]

    def test_m_defaults_to_length(self):
        assert normalized_ptp([2, 1, 2]) == [1.0, 0.5, 1.0]

    def test_validation(self):
        with pytest.raises(ValueError):
            normalized_ptp([-1.0], m=2)
        with pytest.raises(ValueError):
            normalized_ptp([1.0], m=0)


class TestThcOracles:
    @pytest.mark.parametrize("matrix,expected", [
        (TRAJECTORY_A1, 2.5 / 3),
        (TRAJECTORY_B1, 1 / 3),
        (TRAJECTORY_A2, 1 / 3),
        (TRAJECTORY_B2, 1 / 3),
    ])
    def test_reference_scores(self, matrix, expected):
        assert abs(thc(profile(matrix)) - expected) < 1e-12

    def test_consistent_rankings_score_zero(self):
        assert thc(profile([[1, 1, 1], [2, 2, 2], [3, 3, 3]])) == 0.0

    def test_single_context_scores_zero(self):
        assert thc(profile([[1], [2], [3]])) == 0.0

    def test_single_value_scores_zero(self):
        assert thc(profile([[1, 1, 1]])) == 0.0

    def test_two_value_reversal_scores_one(self):
        assert thc(profile([[1, 2], [2, 1]])) == 1.0

    def test_sum_mode_collapses_to_reciprocal_value_count(self):
        for matrix in (TRAJECTORY_A1, TRAJECTORY_B1, TRAJECTORY_A2, TRAJECTORY_B2):
            m = len(matrix)
            assert abs(thc(profile(matrix), PtpNormalization.SUM) - 1 / m) < 1e-12


class TestRankProfileValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            RankProfile("hp", ("a", "b"), ("c1",), np.array([[1.0], [2.0], [3.0]]))

    def test_nonfinite_ranks(self):
        with pytest.raises(ValueError):
            profile([[1, float("nan")], [2, 2]])

    def test_duplicate_values(self):
        with pytest.raises(ValueError):
            RankProfile("hp", ("a", "a"), ("c1",), np.array([[1.0], [2.0]]))

    def test_empty(self):
        with pytest.raises(ValueError):
            RankProfile("hp", (), ("c1",), np.empty((0, 1)))


def brute_force_tau_b(x, y):
    """Tau-b via explicit pair counting."""
    n = len(x)
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0:
                tied_x += 1
            if dy == 0:
                tied_y += 1
            if dx * dy > 0:
                concordant += 1
            elif dx * dy < 0:
                discordant += 1
    n0 = n * (n - 1) // 2
    if n0 == tied_x or n0 == tied_y:
        return math.nan
    return (concordant - discordant) / math.sqrt((n0 - tied_x) * (n0 - tied_y))


def textbook_w(ranks):
    """Tie-corrected coefficient of concordance, written out independently."""
    v, c = ranks.shape
    totals = ranks.sum(axis=1)
    s = float(((totals - totals.mean()) ** 2).sum())
    ties = 0.0
    for j in range(c):
        seen = {}
        for r in ranks[:, j]:
            seen[r] = seen.get(r, 0) + 1
        ties += sum(t**3 - t for t in seen.values())
    denom = c * c * (v**3 - v) - c * ties
    return None if denom <= 0 else 12.0 * s / denom


def random_rank_profile(rng, max_values=5, max_contexts=4):
    v = int(rng.integers(2, max_values + 1))
    c = int(rng.integers(2, max_contexts + 1))
    columns = [rankdata(rng.integers(0, v, size=v), method="average") for _ in range(c)]
    return profile(np.column_stack(columns))


class TestKendall:
    def test_w_identical_rankings(self):
        assert kendall_w(profile([[1, 1], [2, 2], [3, 3]])) == 1.0

    def test_w_reversal_is_zero(self):
        assert kendall_w(profile([[1, 3], [2, 2], [3, 1]])) == 0.0

    def test_w_all_tied_is_undefined(self):
        assert kendall_w(profile([[1.5, 1.5], [1.5, 1.5]])) is None

    def test_w_reference_trajectory(self):
        assert kendall_w(profile(TRAJECTORY_B1)) == pytest.approx(0.76)

    def test_w_requires_two_contexts_and_values(self):
        with pytest.raises(ValueError):
            kendall_w(profile([[1], [2]]))
        with pytest.raises(ValueError):
            kendall_w(profile([[1, 1]]))

    def test_w_matches_independent_formula(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            p = random_rank_profile(rng)
            expected = textbook_w(p.ranks)
            actual = kendall_w(p)
            if expected is None:
                assert actual is None
            else:
                assert actual == pytest.approx(expected, abs=1e-12)

    def test_tau_identical_and_reversed(self):
        identical = profile([[1, 1], [2, 2], [3, 3]])
        assert kendall_tau_matrix(identical)[0, 1] == pytest.approx(1.0)
        reversed_ = profile([[1, 3], [2, 2], [3, 1]])
        assert kendall_tau_matrix(reversed_)[0, 1] == pytest.approx(-1.0)

    def test_tau_matrix_shape_and_diagonal(self):
        p = profile(TRAJECTORY_A1)
        matrix = kendall_tau_matrix(p)
        assert matrix.shape == (5, 5)
        diagonal = np.diag(matrix)
        # the third context ranks everything 2, so its self-correlation is undefined
        assert np.allclose(diagonal[[0, 1, 3, 4]], 1.0)
        assert math.isnan(diagonal[2])
        assert np.allclose(matrix, matrix.T, equal_nan=True)

    def test_tau_undefined_for_fully_tied_column(self):
        p = profile([[1, 2.0], [2, 2.0], [3, 2.0]])
        matrix = kendall_tau_matrix(p)
        assert math.isnan(matrix[0, 1])
        assert math.isnan(matrix[1, 1])
        assert matrix[0, 0] == pytest.approx(1.0)

    def test_tau_matches_brute_force_pair_counting(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            p = random_rank_profile(rng)
            matrix = kendall_tau_matrix(p)
            c = p.ranks.shape[1]
            for i in range(c):
                for j in range(i + 1, c):
                    expected = brute_force_tau_b(p.ranks[:, i], p.ranks[:, j])
                    if math.isnan(expected):
                        assert math.isnan(matrix[i, j])
                    else:
                        assert matrix[i, j] == pytest.approx(expected, abs=1e-12)

    def test_mean_pairwise_tau_skips_undefined_pairs(self):
        p = profile([[1, 1, 2.0], [2, 2, 2.0], [3, 3, 2.0]])
        # pairs involving the tied column are undefined; the 0-1 pair is 1.0
        assert mean_pairwise_tau(p) == pytest.approx(1.0)

    def test_mean_pairwise_tau_none_when_all_undefined(self):
        p = profile([[1.5, 1.5], [1.5, 1.5]])
        assert mean_pairwise_tau(p) is None

    def test_w_one_implies_thc_zero_for_untied_rankings(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            order = rng.permutation(4) + 1
            p = profile(np.column_stack([order, order, order]))
            assert kendall_w(p) == pytest.approx(1.0)
            assert thc(p) == 0.0


ranks_column = st.integers(min_value=2, max_value=5).flatmap(
    lambda v: st.lists(
        st.lists(st.integers(min_value=0, max_value=4), min_size=v, max_size=v)
        .map(lambda scores: tuple(rankdata(scores, method="average"))),
        min_size=1, max_size=5,
    )
)


class TestThcInvariants:
    @given(ranks_column)
    def test_bounds_and_zero_iff_consistent(self, columns):
        p = profile(np.column_stack(columns))
        score = thc(p)
        assert 0.0 <= score <= 1.0
        consistent = all(len(set(row)) == 1 for row in p.ranks)
        assert (score == 0.0) == consistent

    @given(ranks_column, st.randoms())
    def test_relabeling_invariance(self, columns, rnd):
        matrix = np.column_stack(columns)
        p = profile(matrix)
        rows = list(range(matrix.shape[0]))
        cols = list(range(matrix.shape[1]))
        rnd.shuffle(rows)
        rnd.shuffle(cols)
        shuffled = profile(matrix[np.ix_(rows, cols)])
        assert thc(shuffled) == pytest.approx(thc(p), abs=1e-12)

    @given(ranks_column)
    def test_dropping_a_context_never_increases_thc(self, columns):
        matrix = np.column_stack(columns)
        if matrix.shape[1] < 2:
            return
        full = thc(profile(matrix))
        for j in range(matrix.shape[1]):
            reduced = np.delete(matrix, j, axis=1)
            assert thc(profile(reduced)) <= full + 1e-12

    @given(ranks_column)
    def test_sum_mode_degenerates(self, columns):
        matrix = np.column_stack(columns)
        p = profile(matrix)
        spreads = [ptp(row) for row in matrix]
        score = thc(p, PtpNormalization.SUM)
        if sum(spreads) > 0:
            assert abs(score - 1 / matrix.shape[0]) < 1e-12
        else:
            assert score == 0.0


class TestAssembly:
    def test_reference_dataset_end_to_end(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        options = AssemblyOptions(interval_source=IntervalSource.MEAN_SD)
        report, profiles = build_consistency_report(
            dataset, TransferSetup.ACROSS_ENVIRONMENTS, options)
        scores = {e.hyperparameter: e.thc for e in report.entries}
        assert abs(scores["ha"] - 2.5 / 3) < 1e-12
        assert abs(scores["hb"] - 1 / 3) < 1e-12
        ranks = {p.hyperparameter: p.ranks.tolist() for p in profiles}
        assert ranks["ha"] == TRAJECTORY_A1
        assert ranks["hb"] == TRAJECTORY_B1

    def test_points_and_tables_populated(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        options = AssemblyOptions(interval_source=IntervalSource.MEAN_SD)
        assembled = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS, options)
        p = assembled.profiles[0]
        assert len(p.tables) == len(p.contexts)
        assert set(p.points) == {(c, v) for c in p.contexts for v in p.values}

    def test_cannot_pin_the_varying_axis(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        with pytest.raises(ValueError, match="varying axis"):
            assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                              AssemblyOptions(environment="g1"))

    def test_single_context_hyperparameter_skipped_with_reason(self):
        cells = {"solo": {"x": {"g1": (0.0, 1.0)}, "y": {"g1": (2.0, 3.0)}}}
        dataset = dataset_from_intervals(cells)
        assembled = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                                      AssemblyOptions(interval_source=IntervalSource.MEAN_SD))
        assert not assembled.profiles
        assert len(assembled.skipped) == 1
        assert "1 context" in assembled.skipped[0].reason

    def test_value_missing_from_one_context_is_excluded(self, caplog):
        cells = {
            "hp": {
                "x": {"g1": (90.0, 100.0), "g2": (90.0, 100.0)},
                "y": {"g1": (60.0, 70.0), "g2": (60.0, 70.0)},
                "z": {"g1": (30.0, 40.0)},  # never run in g2
            }
        }
        dataset = dataset_from_intervals(cells)
        with caplog.at_level(logging.WARNING, logger="thckit.consistency"):
            assembled = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                                          AssemblyOptions(interval_source=IntervalSource.MEAN_SD))
        assert assembled.profiles[0].values == ("x", "y")
        assert any("not rankable in every context" in r.message for r in caplog.records)

    def test_thin_groups_dropped_with_warning(self, caplog):
        cells = {
            "hp": {
                "x": {"g1": (90.0, 100.0), "g2": (90.0, 100.0)},
                "y": {"g1": (60.0, 70.0), "g2": (60.0, 70.0)},
            }
        }
        dataset = dataset_from_intervals(cells)
        # add a single-seed group for a third value
        from thckit import RunRecord, SweepDataset, SweepSchema, BaselineTable
        schema = SweepSchema(
            agents=dataset.schema.agents,
            environments=dataset.schema.environments,
            data_regimes=dataset.schema.data_regimes,
            hyperparameters={"hp": ("x", "y", "z")},
        )
        records = list(dataset.records)
        records.append(RunRecord("agent01", "g1", "regime01", "hp", "z", 0, 10.0))
        records.append(RunRecord("agent01", "g2", "regime01", "hp", "z", 0, 10.0))
        dataset = SweepDataset(records, dataset.baselines, schema)
        with caplog.at_level(logging.WARNING, logger="thckit.consistency"):
            assembled = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                                          AssemblyOptions(interval_source=IntervalSource.MEAN_SD))
        assert assembled.profiles[0].values == ("x", "y")
        assert any("fewer than 2 seeds" in r.message for r in caplog.records)

    def test_iqm_ci_source_is_deterministic(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        options = AssemblyOptions(resamples=150, seed=9)
        first = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS, options)
        second = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS, options)
        for a, b in zip(first.profiles, second.profiles):
            assert np.array_equal(a.ranks, b.ranks)
            assert a.points == b.points

    def test_workers_do_not_change_assembly(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        serial = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                                   AssemblyOptions(resamples=150, seed=9, workers=1))
        threaded = assemble_profiles(dataset, TransferSetup.ACROSS_ENVIRONMENTS,
                                     AssemblyOptions(resamples=150, seed=9, workers=4))
        for a, b in zip(serial.profiles, threaded.profiles):
            assert np.array_equal(a.ranks, b.ranks)
            assert a.points == b.points

    def test_report_includes_kendall_when_requested(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        options = AssemblyOptions(interval_source=IntervalSource.MEAN_SD)
        report, _ = build_consistency_report(
            dataset, TransferSetup.ACROSS_ENVIRONMENTS, options, include_kendall=True)
        entry = {e.hyperparameter: e for e in report.entries}["hb"]
        assert entry.kendall is not None
        assert entry.kendall.w == pytest.approx(0.76)
        assert entry.kendall.mean_tau == pytest.approx(0.6)

    def test_report_omits_kendall_by_default(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        options = AssemblyOptions(interval_source=IntervalSource.MEAN_SD)
        report, _ = build_consistency_report(
            dataset, TransferSetup.ACROSS_ENVIRONMENTS, options)
        assert all(e.kendall is None for e in report.entries)


class TestRankContext:
    def test_matches_direct_ranking(self):
        cells = {"hp": {
            "1e-2": {"g1": (200.0, 300.0)},
            "1e-1": {"g1": (250.0, 350.0)},
            "1": {"g1": (400.0, 600.0)},
            "1e1": {"g1": (110.0, 220.0)},
            "1e2": {"g1": (30.0, 70.0)},
        }}
        dataset = dataset_from_intervals(cells)
        table, points = rank_context(
            dataset, "hp", agent="agent01", data_regime="regime01",
            options=AssemblyOptions(interval_source=IntervalSource.MEAN_SD))
        assert table.final_ranks() == {
            "1": 1.0, "1e-1": 2.5, "1e-2": 3.0, "1e1": 3.5, "1e2": 5.0}
        assert set(points) == {"1e-2", "1e-1", "1", "1e1", "1e2"}

    def test_selector_matching_nothing(self):
        dataset = dataset_from_intervals(reference_trajectory_cells())
        with pytest.raises(EmptySliceError):
            rank_context(dataset, "ha", agent="agent99", data_regime="regime01")

    def test_pinned_environment_without_enough_seeds(self):
        cells = {"hp": {
            "x": {"g1": (0.0, 1.0), "g2": (2.0, 3.0)},
            "y": {"g1": (4.0, 5.0), "g2": (6.0, 7.0)},
        }}
        dataset = dataset_from_intervals(cells)
        table, _ = rank_context(
            dataset, "hp", agent="agent01", data_regime="regime01", environment="g2",
            options=AssemblyOptions(interval_source=IntervalSource.MEAN_SD))
        assert table.final_ranks() == {"y": 1.0, "x": 2.0}

    def test_empty_context_raises(self):
        cells = {"hp": {"x": {"g1": (0.0, 1.0)}}}
        dataset = dataset_from_intervals(cells)
        with pytest.raises(KeyError):
            rank_context(dataset, "nope", agent="agent01", data_regime="regime01")
