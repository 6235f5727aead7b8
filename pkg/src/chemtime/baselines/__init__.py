"""Baseline classifiers sharing one interface: ``fit(Dataset)`` and ``predict(samples) -> bool array``.

Every classifier standardizes channels with statistics from the data it is
fit on, and serializes through ``to_dict`` / ``from_dict``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core import ChannelStandardizer, Dataset, MTSample
from .adapters import (
    EnsembleVote,
    column_concat,
    column_ensemble_fit,
    column_ensemble_predict,
    column_split,
    majority_vote,
)
from .interval_tree import DecisionTree, interval_features, random_intervals
from .knn import KNN
from .ridge import LAMBDA_GRID, RidgeModel, ridge_fit, ridge_predict, ridge_solve
from .rocket import RocketKernel, apply_kernel, generate_kernels, rocket_features


def _stack(samples: Sequence[MTSample]) -> np.ndarray:
    return np.stack([s.channels for s in samples])


class _Standardized:
    def _fit_scaler(self, ds: Dataset) -> np.ndarray:
        self.scaler = ChannelStandardizer.fit(ds.samples)
        return self.scaler.transform(ds.stack())

    def _scaled(self, samples: Sequence[MTSample]) -> np.ndarray:
        return self.scaler.transform(_stack(samples))


class KNNConcatClassifier(_Standardized):
    kind = "knn_concat"

    def __init__(self, k: int = 1, seed: int = 0):
        self.k = k
        self.knn = None

    def fit(self, ds: Dataset):
        self.knn = KNN(k=self.k).fit(column_concat(self._fit_scaler(ds)), ds.labels())
        return self

    def predict(self, samples):
        return self.knn.predict(column_concat(self._scaled(samples)))

    def to_dict(self):
        return {"k": self.k, "scaler": self.scaler.to_dict(), "knn": self.knn.to_dict()}

    @classmethod
    def from_dict(cls, d):
        obj = cls(k=d["k"])
        obj.scaler = ChannelStandardizer.from_dict(d["scaler"])
        obj.knn = KNN.from_dict(d["knn"])
        return obj


class RidgeConcatClassifier(_Standardized):
    kind = "ridge_concat"

    def __init__(self, lambdas=LAMBDA_GRID, seed: int = 0):
        self.lambdas = tuple(lambdas)
        self.ridge = None

    def fit(self, ds: Dataset):
        self.ridge = ridge_fit(column_concat(self._fit_scaler(ds)), ds.labels(), self.lambdas)
        return self

    def predict(self, samples):
        return ridge_predict(self.ridge, column_concat(self._scaled(samples)))

    def to_dict(self):
        return {"lambdas": list(self.lambdas), "scaler": self.scaler.to_dict(), "ridge": self.ridge.to_dict()}

    @classmethod
    def from_dict(cls, d):
        obj = cls(lambdas=d["lambdas"])
        obj.scaler = ChannelStandardizer.from_dict(d["scaler"])
        obj.ridge = RidgeModel.from_dict(d["ridge"])
        return obj


class RocketClassifier(_Standardized):
    kind = "rocket"

    def __init__(self, n_kernels: int = 1000, seed: int = 0, lambdas=LAMBDA_GRID):
        self.n_kernels = n_kernels
        self.seed = seed
        self.lambdas = tuple(lambdas)
        self.kernels: list[RocketKernel] = []
        self.ridge = None

    def fit(self, ds: Dataset):
        X = self._fit_scaler(ds)
        self.kernels = generate_kernels(X.shape[1], X.shape[2], self.n_kernels, self.seed)
        self.ridge = ridge_fit(rocket_features(X, self.kernels), ds.labels(), self.lambdas)
        return self

    def predict(self, samples):
        return ridge_predict(self.ridge, rocket_features(self._scaled(samples), self.kernels))

    def to_dict(self):
        return {
            "n_kernels": self.n_kernels,
            "seed": self.seed,
            "lambdas": list(self.lambdas),
            "scaler": self.scaler.to_dict(),
            "kernels": [k.to_dict() for k in self.kernels],
            "ridge": self.ridge.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        obj = cls(n_kernels=d["n_kernels"], seed=d["seed"], lambdas=d["lambdas"])
        obj.scaler = ChannelStandardizer.from_dict(d["scaler"])
        obj.kernels = [RocketKernel.from_dict(k) for k in d["kernels"]]
        obj.ridge = RidgeModel.from_dict(d["ridge"])
        return obj


class IntervalTreeClassifier(_Standardized):
    kind = "interval_tree"

    def __init__(self, n_intervals: int = 30, max_depth: int = 8, min_leaf: int = 2, seed: int = 0):
        self.n_intervals = n_intervals
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.intervals = None
        self.tree = None

    def fit(self, ds: Dataset):
        X = self._fit_scaler(ds)
        self.intervals = random_intervals(X.shape[2], self.n_intervals, self.seed)
        self.tree = DecisionTree(self.max_depth, self.min_leaf).fit(interval_features(X, self.intervals), ds.labels())
        return self

    def predict(self, samples):
        return self.tree.predict(interval_features(self._scaled(samples), self.intervals))

    def to_dict(self):
        return {
            "n_intervals": self.n_intervals,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "scaler": self.scaler.to_dict(),
            "intervals": self.intervals.tolist(),
            "tree": self.tree.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        obj = cls(d["n_intervals"], d["max_depth"], d["min_leaf"], d["seed"])
        obj.scaler = ChannelStandardizer.from_dict(d["scaler"])
        obj.intervals = np.array(d["intervals"], dtype=int)
        obj.tree = DecisionTree.from_dict(d["tree"])
        return obj


class NN1EnsembleClassifier(_Standardized):
    """Univariate 1-NN per channel, combined by column-ensemble voting."""

    kind = "nn1_ensemble"

    def __init__(self, seed: int = 0):
        self.ensemble: EnsembleVote | None = None

    def fit(self, ds: Dataset):
        self.ensemble = column_ensemble_fit(self._fit_scaler(ds), ds.labels(), lambda: KNN(k=1))
        return self

    def predict(self, samples):
        return column_ensemble_predict(self.ensemble, self._scaled(samples))

    def to_dict(self):
        return {"scaler": self.scaler.to_dict(), "members": [m.to_dict() for m in self.ensemble.members]}

    @classmethod
    def from_dict(cls, d):
        obj = cls()
        obj.scaler = ChannelStandardizer.from_dict(d["scaler"])
        obj.ensemble = EnsembleVote(members=[KNN.from_dict(m) for m in d["members"]])
        return obj


# test hooks for the evaluation harness


class OracleClassifier:
    """Reads the true label off the sample. Only meaningful as a harness check."""

    kind = "oracle"
    supports_prefix = True

    def __init__(self, seed: int = 0):
        self.positive_index = None

    def fit(self, ds: Dataset):
        self.positive_index = ds.positive_index
        return self

    def predict(self, samples):
        return np.array([s.concentrations[self.positive_index] > 0 for s in samples], dtype=bool)

    def predict_prefix(self, samples, length):
        return self.predict(samples)

    def to_dict(self):
        return {"positive_index": self.positive_index}

    @classmethod
    def from_dict(cls, d):
        obj = cls()
        obj.positive_index = d["positive_index"]
        return obj


class CoinFlipClassifier:
    """Independent fair coin per sample, seeded by (seed, sample id)."""

    kind = "coinflip"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, ds: Dataset):
        return self

    def predict(self, samples):
        out = []
        for s in samples:
            key = [self.seed, s.length] + [ord(c) for c in s.id]
            out.append(bool(np.random.default_rng(key).integers(2)))
        return np.array(out, dtype=bool)

    def to_dict(self):
        return {"seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(seed=d["seed"])


BASELINES = {
    cls.kind: cls
    for cls in (RocketClassifier, KNNConcatClassifier, RidgeConcatClassifier, IntervalTreeClassifier, NN1EnsembleClassifier)
}
TEST_HOOKS = {cls.kind: cls for cls in (OracleClassifier, CoinFlipClassifier)}

__all__ = [
    "BASELINES",
    "TEST_HOOKS",
    "EnsembleVote",
    "IntervalTreeClassifier",
    "KNN",
    "KNNConcatClassifier",
    "NN1EnsembleClassifier",
    "RidgeConcatClassifier",
    "RidgeModel",
    "RocketClassifier",
    "RocketKernel",
    "apply_kernel",
    "column_concat",
    "column_ensemble_fit",
    "column_ensemble_predict",
    "column_split",
    "generate_kernels",
    "majority_vote",
    "ridge_fit",
    "ridge_predict",
    "ridge_solve",
    "rocket_features",
]
