"""Random-interval summary features feeding a single gini decision tree."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def random_intervals(T: int, n_intervals: int = 30, seed: int = 0, min_length: int = 3) -> np.ndarray:
    """(n_intervals, 2) array of [start, stop) pairs inside [0, T)."""
    rng = np.random.default_rng(seed)
    min_length = min(min_length, T)
    out = np.empty((n_intervals, 2), dtype=int)
    for i in range(n_intervals):
        length = int(rng.integers(min_length, T + 1))
        start = int(rng.integers(0, T - length + 1))
        out[i] = (start, start + length)
    return out


def interval_features(X: np.ndarray, intervals: np.ndarray) -> np.ndarray:
    """X (n, k, T) -> (n, n_intervals * k * 3): mean, std, slope per interval per channel."""
    cols = []
    for start, stop in intervals:
        seg = X[:, :, start:stop]
        t = np.arange(stop - start, dtype=float)
        tc = t - t.mean()
        denom = float(tc @ tc)
        slope = seg @ tc / denom if denom > 0 else np.zeros(seg.shape[:2])
        cols.extend([seg.mean(axis=2), seg.std(axis=2), slope])
    return np.concatenate(cols, axis=1)


def gini(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    p = np.mean(y)
    return 2.0 * p * (1.0 - p)


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int = 2):
    """Exhaustive search for the split with the largest gini decrease.

    Returns (feature, threshold, gain) or None when no split has positive gain.
    Thresholds are midpoints between consecutive distinct values.
    """
    n, p = X.shape
    parent = gini(y)
    best = None
    if n < 2 * min_leaf:
        return None
    cut = np.arange(min_leaf, n - min_leaf + 1)
    n_l = cut.astype(float)
    n_r = n - n_l
    for f in range(p):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order].astype(float)
        csum = np.cumsum(ys)
        p_l = csum[cut - 1] / n_l
        p_r = (csum[-1] - csum[cut - 1]) / n_r
        child = (n_l * 2 * p_l * (1 - p_l) + n_r * 2 * p_r * (1 - p_r)) / n
        gain = np.where(xs[cut - 1] == xs[np.minimum(cut, n - 1)], -np.inf, parent - child)
        i = int(np.argmax(gain))
        if gain[i] > 1e-12 and (best is None or gain[i] > best[2]):
            c = cut[i]
            best = (f, 0.5 * (xs[c - 1] + xs[c]), float(gain[i]))
    return best


@dataclass
class DecisionTree:
    max_depth: int = 8
    min_leaf: int = 2
    # flat node arrays; feature == -1 marks a leaf
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def fit(self, X, y) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=bool)
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        # leaf label: majority, positive on ties
        self.value.append(bool(y.sum() * 2 >= len(y)) if len(y) else True)
        if depth >= self.max_depth or len(y) < 2 * self.min_leaf or y.all() or not y.any():
            return node
        split = best_split(X, y, self.min_leaf)
        if split is None:
            return node
        f, thr, _ = split
        go_left = X[:, f] <= thr
        self.feature[node] = int(f)
        self.threshold[node] = float(thr)
        self.left[node] = self._grow(X[go_left], y[go_left], depth + 1)
        self.right[node] = self._grow(X[~go_left], y[~go_left], depth + 1)
        return node

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X), dtype=bool)
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] != -1:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[i] = self.value[node]
        return out

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def split_features(self) -> list[int]:
        return [f for f in self.feature if f != -1]

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": [int(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            max_depth=int(d["max_depth"]),
            min_leaf=int(d["min_leaf"]),
            feature=[int(v) for v in d["feature"]],
            threshold=[float(v) for v in d["threshold"]],
            left=[int(v) for v in d["left"]],
            right=[int(v) for v in d["right"]],
            value=[bool(v) for v in d["value"]],
        )
