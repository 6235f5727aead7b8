"""Benchmark protocols: splits, benchmark records, ranks, survival, serial prefixes, frontier."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import Dataset, f1_score, prefix, seconds_to_steps
from .models import make_model

log = logging.getLogger(__name__)


class CapabilityError(TypeError):
    """The model cannot answer the question asked of it (e.g. prefix inference)."""


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    dataset: str
    split_index: int
    train_ids: tuple[str, ...]
    withheld_ids: tuple[str, ...]


def make_splits(ds: Dataset, n: int = 4, frac: float = 0.75, seed: int = 0) -> list[SplitSpec]:
    """Seeded, label-stratified n-fold partition; split i withholds fold i."""
    if not math.isclose(frac, 1.0 - 1.0 / n):
        raise ValueError(f"frac={frac} is not consistent with {n} folds (expected {1 - 1 / n})")
    labels = ds.labels()
    for cls in (True, False):
        if np.sum(labels == cls) < n:
            raise ValueError(f"dataset {ds.name!r} needs at least {n} samples per class for {n} splits")
    rng = np.random.default_rng(seed)
    ids = np.array([s.id for s in ds.samples])
    fold = np.empty(len(ids), dtype=int)
    offset = 0
    # round-robin over a shuffled order per class; the offset carries so folds stay equal-sized
    for cls in (True, False):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold[idx] = (offset + np.arange(len(idx))) % n
        offset = (offset + len(idx)) % n
    return [
        SplitSpec(
            dataset=ds.name,
            split_index=i,
            train_ids=tuple(ids[fold != i]),
            withheld_ids=tuple(ids[fold == i]),
        )
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# model specs


@dataclass(frozen=True)
class ModelSpec:
    """A named, configured model. `prefix_only` fits once and scores prefixes in survival runs."""

    name: str
    options: dict = field(default_factory=dict)
    prefix_only: bool = False
    label: str | None = None

    @property
    def display(self) -> str:
        return self.label or self.name

    def build(self, seed: int = 0):
        return make_model(self.name, seed=seed, **self.options)


def as_spec(m) -> ModelSpec:
    return m if isinstance(m, ModelSpec) else ModelSpec(str(m))


# ---------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class BenchmarkRecord:
    model: str
    dataset: str
    split: int
    f1: float
    train_seconds: float
    infer_seconds: float
    status: str = "ok"

    @property
    def key(self):
        return (self.model, self.dataset, self.split)


RESULTS_HEADER = ("model", "dataset", "split", "f1", "train_seconds", "infer_seconds", "status")
WALL_CLOCK_COLUMNS = ("train_seconds", "infer_seconds")


def _run_cell(spec: ModelSpec, train: Dataset, test: Dataset, split: SplitSpec, seed: int) -> BenchmarkRecord:
    try:
        model = spec.build(seed=seed + split.split_index)
        t0 = time.perf_counter()
        model.fit(train.subset(split.train_ids))
        t1 = time.perf_counter()
        preds = model.predict(test.samples)
        t2 = time.perf_counter()
        return BenchmarkRecord(spec.display, train.name, split.split_index, f1_score(preds, test.labels()), t1 - t0, t2 - t1)
    except Exception as exc:  # non-converging / degenerate fits are recorded, not raised
        log.warning("%s on %s split %d failed: %s", spec.display, train.name, split.split_index, exc)
        return BenchmarkRecord(spec.display, train.name, split.split_index, 0.0, 0.0, 0.0, status="failed")


def _cell_job(args):
    return _run_cell(*args)


def run_benchmark(
    models: Sequence[ModelSpec | str],
    datasets: Sequence[tuple[Dataset, Dataset]],
    splits: dict[str, list[SplitSpec]] | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> list[BenchmarkRecord]:
    """Fit every model on every split of every dataset; score F1 on the holdout test set.

    With jobs > 1 the fits run in a process pool for F1 only, then a serial
    pass re-runs each cell to take wall-clock times without contention.
    """
    specs = [as_spec(m) for m in models]
    splits = dict(splits or {})
    cells = []
    for train, test in datasets:
        if train.name not in splits:
            splits[train.name] = make_splits(train, seed=seed)
        for spec in specs:
            for sp in splits[train.name]:
                cells.append((spec, train, test, sp, seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(_cell_job, cells))
        timed = [_run_cell(*c) for c in cells]
        records = [
            BenchmarkRecord(s.model, s.dataset, s.split, s.f1, t.train_seconds, t.infer_seconds, s.status)
            for s, t in zip(scored, timed)
        ]
    else:
        records = [_run_cell(*c) for c in cells]
    return sorted(records, key=lambda r: r.key)


def write_results(records: Iterable[BenchmarkRecord], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in records:
        w.writerow([r.model, r.dataset, r.split, repr(float(r.f1)), repr(float(r.train_seconds)), repr(float(r.infer_seconds)), r.status])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_results(path: str | Path) -> list[BenchmarkRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(RESULTS_HEADER)}")
        return [
            BenchmarkRecord(
                model=row["model"],
                dataset=row["dataset"],
                split=int(row["split"]),
                f1=float(row["f1"]),
                train_seconds=float(row["train_seconds"]),
                infer_seconds=float(row["infer_seconds"]),
                status=row["status"],
            )
            for row in reader
        ]


# ---------------------------------------------------------------------------
# ranks


def cell_ranks(records: Iterable[BenchmarkRecord]) -> dict[tuple[str, int], dict[str, float]]:
    """Per (dataset, split): model -> rank by F1 descending, ties averaged.

    Models with any failed cell are dropped entirely; a hole in the remaining
    grid raises ValueError naming the missing (model, dataset, split).
    """
    records = list(records)
    failed = {r.model for r in records if r.status != "ok"}
    ok = [r for r in records if r.model not in failed]
    models = sorted({r.model for r in ok})
    cells = sorted({(r.dataset, r.split) for r in ok})
    table = {(r.model, r.dataset, r.split): r.f1 for r in ok}
    out = {}
    for ds, sp in cells:
        for m in models:
            if (m, ds, sp) not in table:
                raise ValueError(f"missing record for model {m!r} on dataset {ds!r} split {sp}")
        scores = np.array([table[(m, ds, sp)] for m in models])
        ranks = rankdata(-scores, method="average")
        out[(ds, sp)] = dict(zip(models, (float(v) for v in ranks)))
    return out


def average_ranks(records: Iterable[BenchmarkRecord]) -> dict[str, float]:
    per_cell = cell_ranks(records)
    if not per_cell:
        return {}
    models = sorted(next(iter(per_cell.values())))
    return {m: float(np.mean([c[m] for c in per_cell.values()])) for m in models}


def write_ranks(ranks: dict[str, float], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("model", "avg_rank"))
    for m, r in sorted(ranks.items(), key=lambda kv: (kv[1], kv[0])):
        w.writerow((m, repr(r)))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# survival


@dataclass
class SurvivalRound:
    index: int
    window_seconds: float
    steps: int
    f1: dict = field(default_factory=dict)
    eliminated: dict = field(default_factory=dict)
    infer_seconds: dict = field(default_factory=dict)


@dataclass
class SurvivalTable:
    mode: str
    rounds: list[SurvivalRound] = field(default_factory=list)

    def last_survived(self, model: str) -> float | None:
        """Shortest window the model passed; None if it never passed one."""
        passed = [r.window_seconds for r in self.rounds if model in r.f1 and not r.eliminated[model]]
        return min(passed) if passed else None

    def eliminated_at(self, model: str) -> float | None:
        for r in self.rounds:
            if r.eliminated.get(model):
                return r.window_seconds
        return None


SURVIVAL_HEADER = ("round", "window_seconds", "model", "f1", "eliminated")


class _PerSplitModel:
    def __init__(self, spec: ModelSpec, train: Dataset, seed: int):
        self.spec, self.train, self.seed = spec, train, seed
        self.full = None
        self.infer_seconds = None  # per test sample, last measured

    def score(self, test: Dataset, steps: int) -> float:
        if self.spec.prefix_only:
            if self.full is None:
                self.full = self.spec.build(self.seed).fit(self.train)
            if not hasattr(self.full, "predict_prefix"):
                raise CapabilityError(f"{self.spec.display} cannot run prefix-only")
            t0 = time.perf_counter()
            preds = self.full.predict_prefix(test.samples, steps)
        else:
            model = self.spec.build(self.seed).fit(self.train.truncated(steps))
            cut = test.truncated(steps)
            t0 = time.perf_counter()
            preds = model.predict(cut.samples)
        self.infer_seconds = (time.perf_counter() - t0) / len(test)
        return f1_score(preds, test.labels())


def survival_windows(start_s: float, step_s: float) -> list[float]:
    """start, start - step, ... down to the last positive window."""
    out, r = [], 0
    while True:
        w = round(start_s - r * step_s, 9)
        if w <= 0:
            return out
        out.append(w)
        r += 1


def survival(
    models: Sequence[ModelSpec | str],
    train: Dataset,
    test: Dataset,
    splits: list[SplitSpec] | None = None,
    start_s: float = 5.0,
    step_s: float = 0.25,
    floor: float = 0.8,
    mode: str = "plain",
    seed: int = 0,
) -> SurvivalTable:
    """Shrink the exposure window each round; drop models whose mean split F1 falls below `floor`.

    In "inference_biased" mode a model's per-sample inference time is charged
    against the round's window: it sees only ``window - infer_seconds`` of data.
    """
    if start_s <= 0 or step_s <= 0:
        raise ValueError("start and step must be positive")
    if not 0 < floor <= 1:
        raise ValueError("floor must be in (0, 1]")
    if mode not in ("plain", "inference_biased"):
        raise ValueError(f"unknown survival mode {mode!r}")
    specs = [as_spec(m) for m in models]
    splits = splits or make_splits(train, seed=seed)
    rate = train.sample_rate
    T = min(train.min_length, test.min_length)
    runners = {
        s.display: [_PerSplitModel(s, train.subset(sp.train_ids), seed + sp.split_index) for sp in splits] for s in specs
    }
    if mode == "inference_biased":
        # calibration pass at the full starting window to measure inference time
        for name, per_split in runners.items():
            for runner in per_split:
                try:
                    runner.score(test, min(seconds_to_steps(start_s, rate), T))
                except Exception:
                    runner.infer_seconds = math.inf
    alive = [s.display for s in specs]
    table = SurvivalTable(mode=mode)
    for r, window in enumerate(survival_windows(start_s, step_s)):
        if not alive:
            break
        steps = min(seconds_to_steps(window, rate), T)
        rnd = SurvivalRound(index=r, window_seconds=window, steps=steps)
        for name in alive:
            scores, infer = [], []
            for runner in runners[name]:
                budget = window
                if mode == "inference_biased":
                    budget = window - runner.infer_seconds
                try:
                    if budget <= 0:
                        raise ValueError("inference time exceeds the window")
                    scores.append(runner.score(test, min(seconds_to_steps(budget, rate), T)))
                    infer.append(runner.infer_seconds)
                except Exception as exc:
                    log.info("%s failed at window %.2f s: %s", name, window, exc)
                    scores.append(0.0)
            mean_f1 = float(np.mean(scores))
            rnd.f1[name] = mean_f1
            rnd.eliminated[name] = mean_f1 < floor
            rnd.infer_seconds[name] = float(np.mean(infer)) if infer else math.inf
        table.rounds.append(rnd)
        alive = [m for m in alive if not rnd.eliminated[m]]
    return table


def write_survival(table: SurvivalTable, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SURVIVAL_HEADER)
    for rnd in table.rounds:
        for m in rnd.f1:
            w.writerow((rnd.index, f"{rnd.window_seconds:.2f}", m, repr(rnd.f1[m]), int(rnd.eliminated[m])))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_survival(path: str | Path, mode: str = "plain") -> SurvivalTable:
    table = SurvivalTable(mode=mode)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SURVIVAL_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SURVIVAL_HEADER)}")
        for row in reader:
            idx = int(row["round"])
            if not table.rounds or table.rounds[-1].index != idx:
                window = float(row["window_seconds"])
                table.rounds.append(SurvivalRound(index=idx, window_seconds=window, steps=0))
            rnd = table.rounds[-1]
            rnd.f1[row["model"]] = float(row["f1"])
            rnd.eliminated[row["model"]] = bool(int(row["eliminated"]))
    return table


# ---------------------------------------------------------------------------
# serial prefixes


class PerWindowModel:
    """Prefix inference for models that must be retrained per window: one fit per prefix length."""

    def __init__(self, spec: ModelSpec | str, train: Dataset, seed: int = 0):
        self.spec, self.train, self.seed = as_spec(spec), train, seed
        self._fitted = {}

    def predict_prefix(self, samples, length: int) -> np.ndarray:
        if length not in self._fitted:
            self._fitted[length] = self.spec.build(self.seed).fit(self.train.truncated(length))
        return self._fitted[length].predict([prefix(s, length) for s in samples])


def labels_by_prefix(model, test: Dataset, lengths: Iterable[int]) -> dict[int, np.ndarray]:
    if not hasattr(model, "predict_prefix"):
        raise CapabilityError(f"{type(model).__name__} does not support prefix inference")
    return {l: np.asarray(model.predict_prefix(test.samples, l), dtype=bool) for l in lengths}


def serial_prefix(model, test: Dataset, l0: int) -> bool:
    """True iff every test prediction at prefix l0 is unchanged for every longer prefix."""
    T = test.min_length
    if not 1 <= l0 <= T:
        raise ValueError(f"l0={l0} outside [1, {T}]")
    base = labels_by_prefix(model, test, [l0])[l0]
    for l in range(l0 + 1, T + 1):
        if not np.array_equal(labels_by_prefix(model, test, [l])[l], base):
            return False
    return True


def minimal_serial_prefix(model, test: Dataset) -> int:
    """Smallest l0 at which the model is serial (T always qualifies)."""
    T = test.min_length
    if hasattr(model, "labels_by_prefix"):
        P = np.asarray(model.labels_by_prefix([prefix(s, T) for s in test.samples]), dtype=bool)
    else:
        by_len = labels_by_prefix(model, test, range(1, T + 1))
        P = np.stack([by_len[l] for l in range(1, T + 1)], axis=1)
    differs = np.flatnonzero(np.any(P != P[:, [-1]], axis=0))
    return int(differs[-1]) + 2 if len(differs) else 1


# ---------------------------------------------------------------------------
# frontier


@dataclass(frozen=True)
class FrontierPoint:
    model: str
    infer_seconds: float
    f1: float
    on_frontier: bool = False


FRONTIER_HEADER = ("model", "infer_seconds", "f1", "on_frontier")


def pareto_frontier(points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Flags for (infer_seconds, f1) points that no other point dominates.

    q dominates p when q is no slower and no worse, and strictly better in one.
    Exact duplicates do not dominate each other.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(P) == 0:
        raise ValueError("pareto_frontier needs at least one point")
    order = np.lexsort((-P[:, 1], P[:, 0]))  # time ascending, f1 descending
    flags = np.zeros(len(P), dtype=bool)
    best_before = -np.inf  # best f1 among strictly faster points
    i = 0
    while i < len(order):
        j = i
        t = P[order[i], 0]
        while j < len(order) and P[order[j], 0] == t:
            j += 1
        group = order[i:j]
        top = P[group[0], 1]  # group is sorted f1-descending
        for g in group:
            f = P[g, 1]
            flags[g] = f >= top and f > best_before
        best_before = max(best_before, top)
        i = j
    return flags


def frontier_from_results(records: Iterable[BenchmarkRecord]) -> list[FrontierPoint]:
    """Mean inference time and mean F1 per model (successful records only), with frontier flags."""
    by_model: dict[str, list[BenchmarkRecord]] = {}
    for r in records:
        if r.status == "ok":
            by_model.setdefault(r.model, []).append(r)
    names = sorted(by_model)
    pts = [(float(np.mean([r.infer_seconds for r in by_model[m]])), float(np.mean([r.f1 for r in by_model[m]]))) for m in names]
    if not pts:
        return []
    flags = pareto_frontier(pts)
    return [FrontierPoint(m, t, f, bool(fl)) for m, (t, f), fl in zip(names, pts, flags)]


def write_frontier(points: Iterable[FrontierPoint], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONTIER_HEADER)
    for p in points:
        w.writerow((p.model, repr(p.infer_seconds), repr(p.f1), int(p.on_frontier)))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_frontier(path: str | Path) -> list[FrontierPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FRONTIER_HEADER:
            raise ValueError(f"{path}: expected header {','.join(FRONTIER_HEADER)}")
        return [
            FrontierPoint(row["model"], float(row["infer_seconds"]), float(row["f1"]), bool(int(row["on_frontier"])))
            for row in reader
        ]
