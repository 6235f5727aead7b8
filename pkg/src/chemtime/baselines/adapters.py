"""Two ways to run a univariate classifier on k-channel data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..core import DataError, Dataset, MTSample


def _as_array(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.stack()
    if isinstance(data, MTSample):
        return data.channels[None]
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], MTSample):
        lengths = {s.length for s in data}
        if len(lengths) != 1:
            raise DataError(f"ragged sample lengths {sorted(lengths)}")
        return np.stack([s.channels for s in data])
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3:
        raise DataError(f"expected an (n, k, t) array, got shape {arr.shape}")
    return arr


def column_concat(data) -> np.ndarray:
    """(n, k, t) -> (n, k*t): channel 1's values, then channel 2's, ... channel k's."""
    arr = _as_array(data)
    n, k, t = arr.shape
    return arr.reshape(n, k * t)


def column_split(X: np.ndarray, k: int) -> np.ndarray:
    """Inverse of `column_concat`."""
    n, width = X.shape
    if width % k:
        raise DataError(f"width {width} is not a multiple of {k} channels")
    return X.reshape(n, k, width // k)


def majority_vote(votes: np.ndarray) -> np.ndarray:
    """votes: (n, k) booleans. Positive wins ties."""
    votes = np.atleast_2d(np.asarray(votes, dtype=bool))
    pos = votes.sum(axis=1)
    return pos * 2 >= votes.shape[1]


@dataclass
class EnsembleVote:
    members: list = field(default_factory=list)
    tie_break: str = "positive"

    @property
    def n_channels(self) -> int:
        return len(self.members)

    def votes(self, arr: np.ndarray) -> np.ndarray:
        if arr.shape[1] != len(self.members):
            raise DataError(f"{arr.shape[1]} channels given to an ensemble of {len(self.members)}")
        return np.stack([m.predict(arr[:, c, :]) for c, m in enumerate(self.members)], axis=1)


def column_ensemble_fit(ds: Dataset | np.ndarray, y: np.ndarray | None, base: Callable[[], object]) -> EnsembleVote:
    """One classifier per channel, each trained on that channel alone.

    `base()` must return an object with `fit(X2d, y)` / `predict(X2d)`.
    """
    arr = _as_array(ds)
    if y is None:
        if not isinstance(ds, Dataset):
            raise ValueError("labels are required when fitting on a raw array")
        y = ds.labels()
    members = [base().fit(arr[:, c, :], np.asarray(y, dtype=bool)) for c in range(arr.shape[1])]
    return EnsembleVote(members=members)


def column_ensemble_predict(m: EnsembleVote, samples: MTSample | Sequence[MTSample] | np.ndarray) -> np.ndarray | bool:
    single = isinstance(samples, MTSample)
    out = majority_vote(m.votes(_as_array(samples)))
    return bool(out[0]) if single else out
