"""Linear hinge-loss classifier used on top of final-step embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class LinearMargin:
    w: np.ndarray
    b0: float

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Signed distance to the separating hyperplane."""
        norm = np.linalg.norm(self.w)
        # row-wise products so a single row scores the same as inside a batch
        raw = np.sum(np.atleast_2d(np.asarray(X, dtype=float)) * self.w, axis=1) + self.b0
        return raw / norm if norm > 0 else raw

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.decision_function(X) > 0

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b0": self.b0}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearMargin":
        return cls(w=np.array(d["w"], dtype=float), b0=float(d["b0"]))


def _objective(w_aug, Xa, y, lam):
    margins = 1.0 - y * (Xa @ w_aug)
    return 0.5 * lam * float(w_aug @ w_aug) + float(np.mean(np.maximum(margins, 0.0)))


def fit_linear_margin(X: np.ndarray, y: np.ndarray, lam: float = 1e-3, n_iter: int = 2000) -> LinearMargin:
    """Full-batch Pegasos: subgradient steps of size 1/(lam*t) with projection.

    `y` holds +1/-1. The bias rides along as a constant feature. Deterministic;
    returns the iterate with the lowest regularized hinge objective.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise DegenerateFitError("margin classifier needs both classes in the training set")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1/-1")
    Xa = np.hstack([X, np.ones((len(X), 1))])
    w = np.zeros(Xa.shape[1])
    radius = 1.0 / np.sqrt(lam)
    best_w, best_obj = w.copy(), _objective(w, Xa, y, lam)
    for t in range(1, n_iter + 1):
        eta = 1.0 / (lam * t)
        active = y * (Xa @ w) < 1.0
        grad = lam * w - (y[active, None] * Xa[active]).sum(axis=0) / len(y)
        w = w - eta * grad
        norm = np.linalg.norm(w)
        if norm > radius:
            w = w * (radius / norm)
        obj = _objective(w, Xa, y, lam)
        if obj < best_obj:
            best_w, best_obj = w.copy(), obj
    return LinearMargin(w=best_w[:-1], b0=float(best_w[-1]))
