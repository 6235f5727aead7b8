from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KNN:
    """Euclidean k-nearest-neighbours on tabular rows. Distance ties go to the lower index."""

    k: int = 1
    X: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def fit(self, X, y) -> "KNN":
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            raise ValueError("KNN needs at least one training row")
        self.X = X
        self.y = np.asarray(y, dtype=bool)
        return self

    def neighbours(self, Q) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        # direct differences, not the expanded square, so exact ties stay ties
        d2 = np.stack([np.sum((self.X - q) ** 2, axis=1) for q in Q])
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict(self, Q) -> np.ndarray:
        if len(self.X) == 0:
            raise ValueError("KNN is not fitted")
        nb = self.neighbours(Q)
        votes = self.y[nb]
        pos = votes.sum(axis=1)
        out = pos * 2 > self.k
        tie = pos * 2 == self.k
        out[tie] = votes[tie, 0]
        return out

    def to_dict(self) -> dict:
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KNN":
        return cls(k=int(d["k"]), X=np.array(d["X"], dtype=float), y=np.array(d["y"], dtype=bool))
