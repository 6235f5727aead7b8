"""Closed-form ridge classifier: the linear read-out for ROCKET and the concat adapter."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..core import f1_score

LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


def ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (X^T X + lam I) w = X^T y by Cholesky; lam > 0 keeps the system definite."""
    if lam <= 0:
        raise ValueError("ridge lambda must be positive")
    X = np.asarray(X, dtype=float)
    A = X.T @ X
    A[np.diag_indices_from(A)] += lam
    return cho_solve(cho_factor(A), X.T @ np.asarray(y, dtype=float))


@dataclass
class RidgeModel:
    weights: np.ndarray  # last entry is the intercept
    lam: float
    mean: np.ndarray
    std: np.ndarray

    def design(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mean) / self.std
        return np.hstack([Z, np.ones((len(Z), 1))])

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.design(X) @ self.weights

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "lam": self.lam, "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeModel":
        return cls(
            weights=np.array(d["weights"], dtype=float),
            lam=float(d["lam"]),
            mean=np.array(d["mean"], dtype=float),
            std=np.array(d["std"], dtype=float),
        )


def holdout_mask(y: np.ndarray, frac: float = 0.2) -> np.ndarray:
    """Deterministic stratified holdout: the last `frac` of each class, in input order."""
    mask = np.zeros(len(y), dtype=bool)
    for cls in (False, True):
        idx = np.flatnonzero(y == cls)
        n_hold = int(round(frac * len(idx)))
        if n_hold and n_hold < len(idx):
            mask[idx[-n_hold:]] = True
    return mask


def ridge_fit(X: np.ndarray, y: np.ndarray, lambdas: Sequence[float] = LAMBDA_GRID) -> RidgeModel:
    """Standardize features, pick lambda by holdout F1, refit on everything.

    `y` is +1/-1 (or boolean). Ties in holdout F1 go to the larger lambda.
    """
    X = np.asarray(X, dtype=float)
    y_bool = np.asarray(y) > 0
    if len(y_bool) < 2 or y_bool.all() or not y_bool.any():
        raise ValueError("ridge_fit needs n >= 2 and both classes")
    target = np.where(y_bool, 1.0, -1.0)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    probe = RidgeModel(weights=np.zeros(X.shape[1] + 1), lam=0.0, mean=mean, std=std)
    D = probe.design(X)
    hold = holdout_mask(y_bool)
    best_lam, best_f1 = None, -1.0
    if hold.any():
        for lam in sorted(lambdas):
            w = ridge_solve(D[~hold], target[~hold], lam)
            score = f1_score(D[hold] @ w > 0, y_bool[hold])
            if score >= best_f1:
                best_lam, best_f1 = lam, score
    else:
        best_lam = max(lambdas)
    probe.weights = ridge_solve(D, target, best_lam)
    probe.lam = float(best_lam)
    return probe


def ridge_predict(m: RidgeModel, X: np.ndarray) -> np.ndarray:
    return m.decision_function(X) > 0
