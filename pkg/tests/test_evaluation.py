import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemtime.core import prefix
from chemtime.evaluation import (
    BenchmarkRecord,
    CapabilityError,
    FrontierPoint,
    ModelSpec,
    PerWindowModel,
    average_ranks,
    cell_ranks,
    frontier_from_results,
    make_splits,
    minimal_serial_prefix,
    pareto_frontier,
    read_frontier,
    read_results,
    read_survival,
    run_benchmark,
    serial_prefix,
    survival,
    survival_windows,
    write_frontier,
    write_ranks,
    write_results,
    write_survival,
)

from conftest import toy_dataset
from oracles import dominated_flags


def rec(model, ds, split, f1, status="ok", t=0.0):
    return BenchmarkRecord(model, ds, split, f1, t, t, status)


# splits


def test_splits_on_100_samples():
    ds = toy_dataset(n=100, k=2, T=6)
    splits = make_splits(ds, seed=3)
    assert len(splits) == 4
    all_ids = {s.id for s in ds.samples}
    withheld = []
    for sp in splits:
        assert len(sp.train_ids) == 75 and len(sp.withheld_ids) == 25
        assert set(sp.train_ids) | set(sp.withheld_ids) == all_ids
        assert not set(sp.train_ids) & set(sp.withheld_ids)
        withheld.extend(sp.withheld_ids)
    assert sorted(withheld) == sorted(all_ids)
    assert make_splits(ds, seed=3) == splits
    assert make_splits(ds, seed=4) != splits


def test_splits_are_stratified():
    ds = toy_dataset(n=40, k=2, T=6)
    labels = dict(zip((s.id for s in ds.samples), ds.labels()))
    n_pos = sum(labels.values())
    for sp in make_splits(ds):
        assert abs(sum(labels[i] for i in sp.withheld_ids) - n_pos / 4) <= 1


def test_splits_need_enough_samples_per_class():
    with pytest.raises(ValueError):
        make_splits(toy_dataset(n=6, k=2, T=6))
    with pytest.raises(ValueError):
        make_splits(toy_dataset(n=40, k=2, T=6), frac=0.5)


# benchmark


@pytest.fixture(scope="module")
def small_pair():
    return toy_dataset(n=24, k=2, T=10, seed=1, name="toyA"), toy_dataset(n=12, k=2, T=10, seed=2, name="toyA")


def test_benchmark_counts_and_oracle(small_pair):
    recs = run_benchmark(["oracle", "knn_concat"], [small_pair])
    assert len(recs) == 8
    assert all(r.train_seconds >= 0 and r.infer_seconds >= 0 and np.isfinite(r.train_seconds) for r in recs)
    assert all(r.f1 == 1.0 for r in recs if r.model == "oracle")
    assert [r.key for r in recs] == sorted(r.key for r in recs)


def test_failed_model_is_recorded(small_pair):
    recs = run_benchmark([ModelSpec("ridge_concat", {"lambdas": [-1.0]}, label="broken"), "oracle"], [small_pair])
    broken = [r for r in recs if r.model == "broken"]
    assert len(broken) == 4 and all(r.status == "failed" for r in broken)
    assert average_ranks(recs) == {"oracle": 1.0}


def test_parallel_benchmark_matches_serial_scores(small_pair):
    serial = run_benchmark(["knn_concat", "oracle"], [small_pair], jobs=1)
    parallel = run_benchmark(["knn_concat", "oracle"], [small_pair], jobs=2)
    assert [(r.key, r.f1, r.status) for r in serial] == [(r.key, r.f1, r.status) for r in parallel]


def test_results_roundtrip(tmp_path):
    recs = [rec("a", "d", 0, 1 / 3, t=0.125), rec("b", "d", 0, 0.0, "failed")]
    write_results(recs, tmp_path / "r.csv")
    assert read_results(tmp_path / "r.csv") == recs
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "model,dataset,split,f1,train_seconds,infer_seconds,status"


# ranks


def test_rank_examples():
    assert average_ranks([rec("a", "d", s, 0.3) for s in range(4)]) == {"a": 1.0}
    recs = [rec("a", "d", s, 0.9) for s in range(4)] + [rec("b", "d", s, 0.4) for s in range(4)]
    assert average_ranks(recs) == {"a": 1.0, "b": 2.0}


def test_rank_hand_example_with_tie():
    recs = [
        rec("A", "d1", 0, 0.9), rec("B", "d1", 0, 0.9), rec("C", "d1", 0, 0.5),
        rec("A", "d2", 0, 0.6), rec("B", "d2", 0, 0.8), rec("C", "d2", 0, 0.7),
    ]  # fmt: skip
    cells = cell_ranks(recs)
    assert cells[("d1", 0)] == {"A": 1.5, "B": 1.5, "C": 3.0}
    assert cells[("d2", 0)] == {"A": 3.0, "B": 1.0, "C": 2.0}
    for c in cells.values():
        assert sum(c.values()) == 6.0
    assert average_ranks(recs) == {"A": 2.25, "B": 1.25, "C": 2.5}
    assert write_ranks(average_ranks(recs)).splitlines() == ["model,avg_rank", "B,1.25", "A,2.25", "C,2.5"]


def test_rank_missing_cell_names_hole():
    recs = [rec("a", "d", 0, 0.5), rec("b", "d", 0, 0.4), rec("a", "d", 1, 0.5)]
    with pytest.raises(ValueError, match="'b'.*'d'.*split 1"):
        average_ranks(recs)


@given(st.lists(st.integers(0, 4), min_size=2, max_size=6))
def test_rank_sums_per_cell(scores):
    recs = [rec(f"m{i}", "d", 0, s / 4) for i, s in enumerate(scores)]
    ranks = cell_ranks(recs)[("d", 0)]
    m = len(scores)
    assert sum(ranks.values()) == m * (m + 1) / 2
    assert all(1 <= r <= m for r in ranks.values())


# survival


def test_windows_follow_quarter_second_steps():
    w = survival_windows(5.0, 0.25)
    assert w[:4] == [5.0, 4.75, 4.5, 4.25] and w[-1] == 0.25 and len(w) == 20
    assert all(a > b for a, b in zip(w, w[1:]))


@pytest.fixture(scope="module")
def long_pair():
    return toy_dataset(n=40, k=2, T=100, seed=3, name="long"), toy_dataset(n=32, k=2, T=100, seed=4, name="long")


def test_oracle_survives_every_window(long_pair):
    train, test = long_pair
    table = survival(["oracle"], train, test)
    assert [r.window_seconds for r in table.rounds] == survival_windows(5.0, 0.25)
    assert table.rounds[0].steps == 100 and table.rounds[-1].steps == 5
    assert table.last_survived("oracle") == 0.25 and table.eliminated_at("oracle") is None


@pytest.mark.parametrize("seed", range(10))
def test_coinflip_eliminated_in_first_round(long_pair, seed):
    train, test = long_pair
    assert sum(test.labels()) == 16
    table = survival(["coinflip", "oracle"], train, test, seed=seed)
    assert table.eliminated_at("coinflip") == 5.0
    assert table.rounds[0].f1["coinflip"] < 0.8
    assert all("coinflip" not in r.f1 for r in table.rounds[1:])


def test_elimination_is_monotone_and_file_roundtrips(long_pair, tmp_path):
    train, test = long_pair
    table = survival(["knn_concat", "coinflip", "oracle"], train, test, start_s=1.5, step_s=0.5)
    alive_sets = [set(r.f1) for r in table.rounds]
    assert all(b <= a for a, b in zip(alive_sets, alive_sets[1:]))
    write_survival(table, tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text()
    assert text.splitlines()[1].split(",")[1] == "1.50"
    back = read_survival(tmp_path / "s.csv")
    assert [r.f1 for r in back.rounds] == [r.f1 for r in table.rounds]
    assert [r.eliminated for r in back.rounds] == [r.eliminated for r in table.rounds]


def test_inference_biased_mode_and_errors(long_pair):
    train, test = long_pair
    table = survival(["oracle"], train, test, start_s=1.0, step_s=0.5, mode="inference_biased")
    assert table.mode == "inference_biased" and table.last_survived("oracle") == 0.5
    with pytest.raises(ValueError):
        survival(["oracle"], train, test, floor=0.0)
    with pytest.raises(ValueError):
        survival(["oracle"], train, test, mode="fancy")


def test_prefix_only_requires_capability(long_pair):
    train, test = long_pair
    table = survival([ModelSpec("knn_concat", prefix_only=True)], train, test, start_s=1.0, step_s=0.5)
    assert table.eliminated_at("knn_concat") == 1.0


# serial prefixes


class _Constructed:
    def __init__(self, rule):
        self.rule = rule

    def predict_prefix(self, samples, length):
        return np.array([self.rule(prefix(s, length), length) for s in samples], dtype=bool)


@pytest.fixture(scope="module")
def serial_test():
    return toy_dataset(n=8, k=2, T=80, seed=9)


def test_constant_classifier_is_serial_from_start(serial_test):
    m = _Constructed(lambda s, l: True)
    assert serial_prefix(m, serial_test, 1)
    assert minimal_serial_prefix(m, serial_test) == 1


def test_step_zero_reader_is_serial_from_start(serial_test):
    m = _Constructed(lambda s, l: s.channels[0, 0] > 0)
    assert serial_prefix(m, serial_test, 1) and minimal_serial_prefix(m, serial_test) == 1


def test_flip_at_step_50(serial_test):
    m = _Constructed(lambda s, l: l >= 50)
    assert not serial_prefix(m, serial_test, 49)
    assert not serial_prefix(m, serial_test, 1)
    assert serial_prefix(m, serial_test, 50)
    assert minimal_serial_prefix(m, serial_test) == 50


def test_serial_prefix_errors(serial_test):
    with pytest.raises(CapabilityError):
        serial_prefix(object(), serial_test, 3)
    with pytest.raises(ValueError):
        serial_prefix(_Constructed(lambda s, l: True), serial_test, 0)


def test_per_window_model_retrains_per_length(long_pair):
    train, test = long_pair
    m = PerWindowModel("oracle", train)
    assert serial_prefix(m, test, 90)
    assert sorted(m._fitted) == list(range(90, 101))


# frontier


def test_frontier_examples():
    assert pareto_frontier([(1.0, 0.5)]).tolist() == [True]
    assert pareto_frontier([(1.0, 0.9), (2.0, 0.8)]).tolist() == [True, False]
    assert pareto_frontier([(1.0, 0.9), (1.0, 0.9), (0.5, 0.2)]).tolist() == [True, True, True]


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=40), st.randoms())
@settings(max_examples=200)
def test_frontier_matches_quadratic_oracle_and_permutation(pts, rnd):
    pts = [(t / 3, f / 6) for t, f in pts]
    flags = pareto_frontier(pts)
    assert flags.tolist() == dominated_flags(pts).tolist()
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    assert pareto_frontier([pts[i] for i in perm]).tolist() == [flags[i] for i in perm]


def test_frontier_from_results_and_roundtrip(tmp_path):
    recs = [rec("fast", "d", s, 0.7, t=0.1) for s in range(2)] + [rec("slow", "d", s, 0.9, t=1.0) for s in range(2)]
    recs += [rec("bad", "d", s, 0.5, t=2.0) for s in range(2)] + [rec("dead", "d", 0, 0.0, "failed")]
    pts = frontier_from_results(recs)
    assert [(p.model, p.on_frontier) for p in pts] == [("bad", False), ("fast", True), ("slow", True)]
    write_frontier(pts, tmp_path / "f.csv")
    assert read_frontier(tmp_path / "f.csv") == pts
    with pytest.raises(ValueError):
        pareto_frontier([])
