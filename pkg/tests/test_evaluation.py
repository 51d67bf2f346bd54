import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quantlsh.coding import CodingParams
from quantlsh.errors import InvalidParams, TTooLarge
from quantlsh.evaluation import (
    SweepSpec,
    best_rows,
    brute_force_topT,
    ground_truth,
    make_synthetic,
    recall,
    run_sweep,
    sweep_cells,
)
from quantlsh.lsh_index import LshConfig, LshIndex
from quantlsh.projections import normalize


class TestTopT:
    def test_all(self):
        X = np.eye(3)
        assert sorted(brute_force_topT(X, [5, 6, 7], X[0], 3)) == [5, 6, 7]

    def test_indexed_vector_first(self, small_data):
        d = small_data
        assert brute_force_topT(d.X, d.ids, d.X[17], 5)[0] == 17

    def test_order(self):
        q = np.array([1.0, 0.0])
        X = np.array([[0.1, np.sqrt(0.99)], [0.9, np.sqrt(0.19)], [0.5, np.sqrt(0.75)]])
        assert brute_force_topT(X, [0, 1, 2], q, 2) == [1, 2]

    def test_ties_by_id(self):
        X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert brute_force_topT(X, [9, 4, 1], np.array([1.0, 0.0]), 2) == [4, 9]

    def test_too_large(self):
        with pytest.raises(TTooLarge):
            brute_force_topT(np.eye(2), [0, 1], np.array([1.0, 0.0]), 3)

    def test_cache(self, tmp_path, small_data):
        d = small_data
        a = ground_truth(d.X, d.ids, d.Q[:5], 4, cache_dir=tmp_path)
        assert len(list(tmp_path.iterdir())) == 1
        b = ground_truth(d.X, d.ids, d.Q[:5], 4, cache_dir=tmp_path)
        assert np.array_equal(a, b)
        ground_truth(d.X, d.ids, d.Q[:5], 3, cache_dir=tmp_path)
        assert len(list(tmp_path.iterdir())) == 2


class TestRecall:
    def test_worked_example(self):
        truth = list(range(100))
        retrieved = list(range(30, 100)) + list(range(1000, 1050))
        assert len(retrieved) == 120
        assert recall(retrieved, truth) == pytest.approx(0.70)

    def test_extremes(self):
        assert recall({1, 2}, [1, 2]) == 1.0
        assert recall({3}, [1, 2]) == 0.0
        with pytest.raises(InvalidParams):
            recall({1}, [])

    @given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)), st.lists(st.integers(0, 50), min_size=1, unique=True))
    def test_monotone(self, a, extra, truth):
        assert recall(a | extra, truth) >= recall(a, truth)


class TestSynthetic:
    def test_zero_spread_single_cluster(self):
        d = make_synthetic(50, 5, 1, 0.0, 1)
        assert np.allclose(d.X, d.X[0], atol=1e-15)

    def test_deterministic(self):
        a = make_synthetic(100, 8, 4, 0.3, 9, 10)
        b = make_synthetic(100, 8, 4, 0.3, 9, 10)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Q, b.Q)

    def test_unit_rows_and_disjoint_ids(self):
        d = make_synthetic(100, 8, 4, 0.3, 9, 10)
        np.testing.assert_allclose(np.linalg.norm(d.X, axis=1), 1.0, atol=1e-12)
        assert not set(d.ids.tolist()) & set(d.query_ids.tolist())

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            make_synthetic(0, 4, 1, 0.1, 0)

    def test_benchmark_neighbor_similarity(self):
        # The benchmark spread is tuned so the median top-10 correlation is about 0.9.
        from quantlsh.evaluation import BENCHMARK as B

        d = make_synthetic(B["N"], B["D"], B["num_clusters"], B["spread"], 0, 100)
        truth = ground_truth(d.X, d.ids, d.Q, B["T"])
        corr = np.array([d.X[t] @ q for t, q in zip(truth, d.Q)])
        assert abs(np.median(corr) - 0.9) < 0.01


SPEC = dict(K_values=(2, 3, 5), L_values=(1, 2, 4), w_values=(0.75, 2.0), T=5, target_recalls=(0.3, 0.9))


@pytest.mark.parametrize("scheme", ["uq", "uq-offset"])
def test_engine_matches_index(small_data, scheme):
    """The vectorized sweep agrees exactly with explicit per-(K, L) indexes."""
    d = small_data
    spec = SweepSpec(scheme=scheme, seed=4, **SPEC)
    truth = ground_truth(d.X, d.ids, d.Q, spec.T)
    cells = {(c.w, c.K, c.L): c for c in sweep_cells(d.ids, d.X, d.Q, spec, truth)}
    assert len(cells) == 2 * 3 * 3
    for w in spec.w_values:
        for K in spec.K_values:
            for L in spec.L_values:
                idx = LshIndex.from_arrays(d.ids, d.X, LshConfig(K, L, CodingParams(scheme, w), 4))
                got = [idx.query(q) for q in d.Q]
                fr = np.mean([len(g) / len(d.ids) for g in got])
                rc = np.mean([recall(g, t) for g, t in zip(got, truth)])
                cell = cells[(w, K, L)]
                assert cell.mean_fraction == pytest.approx(fr, abs=1e-15)
                assert cell.mean_recall == pytest.approx(rc, abs=1e-15)


def test_sweep_monotonicity(small_data):
    d = small_data
    spec = SweepSpec(K_values=(2, 3, 4, 6), L_values=(1, 2, 4, 8), w_values=(1.0, 2.5), T=5, seed=1)
    cells = {(c.w, c.K, c.L): c for c in sweep_cells(d.ids, d.X, d.Q, spec)}
    for w in spec.w_values:
        for K in spec.K_values:
            for L0, L1 in zip(spec.L_values, spec.L_values[1:]):
                assert cells[(w, K, L1)].mean_recall >= cells[(w, K, L0)].mean_recall
                assert cells[(w, K, L1)].mean_fraction >= cells[(w, K, L0)].mean_fraction
        for L in spec.L_values:
            for K0, K1 in zip(spec.K_values, spec.K_values[1:]):
                assert cells[(w, K1, L)].mean_fraction <= cells[(w, K0, L)].mean_fraction


def test_retrieve_everything_limit(small_data):
    d = small_data
    spec = SweepSpec(K_values=(1,), L_values=(1,), w_values=(1e6,), T=5, target_recalls=(0.99,), scheme="uq-offset")
    (row,) = run_sweep(d.ids, d.X, d.query_ids, d.Q, spec)
    assert row.feasible
    assert row.achieved_recall == 1.0 and row.best_fraction_retrieved == 1.0


def test_huge_w_without_offset_is_a_sign_bit(small_data):
    # floor(x / w) is 0 or -1 once |x| < w, so plain quantization keeps only
    # the sign of each projection and cannot retrieve everything.
    d = small_data
    spec = SweepSpec(K_values=(1,), L_values=(1,), w_values=(1e6,), T=5, target_recalls=(0.5,), scheme="uq")
    (cell,) = sweep_cells(d.ids, d.X, d.Q, spec)
    assert 0.3 < cell.mean_fraction < 0.7


def test_infeasible_rows_are_reported(small_data):
    d = small_data
    spec = SweepSpec(K_values=(40,), L_values=(1,), w_values=(0.25,), T=5, target_recalls=(0.99,))
    (row,) = run_sweep(d.ids, d.X, d.query_ids, d.Q, spec)
    assert not row.feasible
    assert row.best_fraction_retrieved is None and row.K_at_best is None


def test_rows_pick_minimum_feasible(small_data):
    d = small_data
    spec = SweepSpec(scheme="uq", seed=2, **SPEC)
    cells = sweep_cells(d.ids, d.X, d.Q, spec)
    for row in best_rows(cells, spec):
        ok = [c for c in cells if c.w == row.w and c.mean_recall >= row.target_recall]
        if ok:
            assert row.best_fraction_retrieved == min(c.mean_fraction for c in ok)
            assert row.achieved_recall >= row.target_recall
            assert 0.0 <= row.best_fraction_retrieved <= 1.0


def test_reproducible_and_worker_independent(small_data):
    d = small_data
    spec = SweepSpec(scheme="uq-offset", seed=8, **SPEC)
    a = run_sweep(d.ids, d.X, d.query_ids, d.Q, spec)
    b = run_sweep(d.ids, d.X, d.query_ids, d.Q, spec, workers=2)
    assert a == b


def test_queries_must_be_disjoint(small_data):
    d = small_data
    with pytest.raises(InvalidParams):
        run_sweep(d.ids, d.X, d.ids[:3], d.X[:3], SweepSpec(**SPEC))


def test_spec_validation():
    with pytest.raises(InvalidParams):
        SweepSpec(K_values=())
    with pytest.raises(InvalidParams):
        SweepSpec(target_recalls=(1.2,))
    with pytest.raises(InvalidParams):
        SweepSpec(w_values=(0.0,))
