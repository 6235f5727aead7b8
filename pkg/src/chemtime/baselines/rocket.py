"""Random convolutional kernels (multivariate variant) with PPV / max pooling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Dataset, MTSample

CANDIDATE_LENGTHS = (7, 9, 11)


@dataclass(frozen=True)
class RocketKernel:
    length: int
    weights: np.ndarray  # (len(channels), length)
    bias: float
    dilation: int
    padding: int
    channels: tuple[int, ...]

    def span(self) -> int:
        return (self.length - 1) * self.dilation + 1

    def output_length(self, T: int) -> int:
        return T + 2 * self.padding - (self.length - 1) * self.dilation

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "dilation": self.dilation,
            "padding": self.padding,
            "channels": list(self.channels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RocketKernel":
        return cls(
            length=int(d["length"]),
            weights=np.array(d["weights"], dtype=float),
            bias=float(d["bias"]),
            dilation=int(d["dilation"]),
            padding=int(d["padding"]),
            channels=tuple(int(c) for c in d["channels"]),
        )


def generate_kernels(k: int, T: int, n_kernels: int = 1000, seed: int = 0) -> list[RocketKernel]:
    """Kernels for inputs with k channels and length T.

    Raises ValueError if a drawn kernel cannot fit the (padded) input, so a bad
    kernel never reaches the transform.
    """
    rng = np.random.default_rng(seed)
    kernels = []
    for _ in range(n_kernels):
        length = int(rng.choice(CANDIDATE_LENGTHS))
        n_sel = int(2 ** rng.uniform(0, np.log2(min(k, length) + 1)))
        n_sel = min(max(n_sel, 1), k)
        channels = tuple(sorted(int(c) for c in rng.choice(k, n_sel, replace=False)))
        w = rng.normal(0.0, 1.0, size=(n_sel, length))
        w = w - w.mean(axis=1, keepdims=True)
        bias = float(rng.uniform(-1.0, 1.0))
        top = np.log2((T - 1) / (length - 1)) if T > length else 0.0
        dilation = int(2 ** rng.uniform(0, top))
        padding = ((length - 1) * dilation) // 2 if rng.integers(2) == 1 else 0
        kern = RocketKernel(length, w, bias, dilation, padding, channels)
        if kern.span() > T + 2 * padding:
            raise ValueError(f"kernel span {kern.span()} exceeds padded input length {T + 2 * padding}")
        kernels.append(kern)
    return kernels


def apply_kernel(X: np.ndarray, kern: RocketKernel) -> np.ndarray:
    """Convolution outputs (n, out_len) for X of shape (n, k, T)."""
    n, _, T = X.shape
    sub = X[:, kern.channels, :]
    if kern.padding:
        sub = np.pad(sub, ((0, 0), (0, 0), (kern.padding, kern.padding)))
    out_len = kern.output_length(T)
    out = np.full((n, out_len), kern.bias)
    for j in range(kern.length):
        start = j * kern.dilation
        out += np.einsum("c,nct->nt", kern.weights[:, j], sub[:, :, start : start + out_len])
    return out


def rocket_features(data: Dataset | MTSample | Sequence[MTSample] | np.ndarray, kernels: Sequence[RocketKernel]) -> np.ndarray:
    """(n, 2 * n_kernels) matrix: [ppv_0, max_0, ppv_1, max_1, ...]."""
    if isinstance(data, Dataset):
        X = data.stack()
    elif isinstance(data, MTSample):
        X = data.channels[None]
    elif isinstance(data, np.ndarray):
        X = data if data.ndim == 3 else data[None]
    else:
        X = np.stack([s.channels for s in data])
    feats = np.empty((X.shape[0], 2 * len(kernels)))
    for i, kern in enumerate(kernels):
        out = apply_kernel(X, kern)
        feats[:, 2 * i] = np.mean(out > 0, axis=1)
        feats[:, 2 * i + 1] = out.max(axis=1)
    return feats
