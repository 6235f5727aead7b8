"""Domain types shared by every module: samples, datasets, prefixes, metrics, file I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 20.0


class DataError(ValueError):
    """Malformed or inconsistent data (bad file contents, shape mismatch)."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MTSample:
    """One exposure: a k x T resistance matrix plus its label metadata."""

    id: str
    channels: np.ndarray
    onset_index: int
    concentrations: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        channels = _frozen(self.channels)
        if channels.ndim != 2 or channels.shape[1] < 1:
            raise DataError(f"sample {self.id!r}: channels must be a non-empty k x T matrix")
        conc = _frozen(self.concentrations)
        if conc.ndim != 1:
            raise DataError(f"sample {self.id!r}: concentrations must be a vector")
        if np.any(conc < 0):
            raise DataError(f"sample {self.id!r}: negative concentration")
        # onset == T marks a window that ends before flux starts (a clamped prefix)
        if not 0 <= int(self.onset_index) <= channels.shape[1]:
            raise DataError(f"sample {self.id!r}: onset_index {self.onset_index} outside [0, {channels.shape[1]}]")
        if not self.sample_rate > 0:
            raise DataError(f"sample {self.id!r}: sample_rate must be positive")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "concentrations", conc)
        object.__setattr__(self, "onset_index", int(self.onset_index))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def length(self) -> int:
        return self.channels.shape[1]

    def exposed_analyte(self) -> int | None:
        """Index of the single exposed analyte, None for a blank exposure."""
        nz = np.flatnonzero(self.concentrations > 0)
        if len(nz) == 0:
            return None
        if len(nz) > 1:
            raise DataError(f"sample {self.id!r} is a mixture; only single-analyte exposures are supported")
        return int(nz[0])

    def __eq__(self, other):
        if not isinstance(other, MTSample):
            return NotImplemented
        return (
            self.id == other.id
            and self.onset_index == other.onset_index
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.concentrations, other.concentrations)
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    name: str
    analyte_names: tuple[str, ...]
    samples: tuple[MTSample, ...]
    positive_analyte: str

    def __post_init__(self):
        object.__setattr__(self, "analyte_names", tuple(self.analyte_names))
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.positive_analyte not in self.analyte_names:
            raise DataError(f"positive analyte {self.positive_analyte!r} not in {self.analyte_names}")
        n_analytes = len(self.analyte_names)
        shapes = set()
        for s in self.samples:
            if len(s.concentrations) != n_analytes:
                raise DataError(f"sample {s.id!r}: expected {n_analytes} concentrations, got {len(s.concentrations)}")
            shapes.add((s.n_channels, s.sample_rate))
        if len(shapes) > 1:
            raise DataError(f"dataset {self.name!r}: samples disagree on channel count / sample rate: {sorted(shapes)}")

    def __len__(self):
        return len(self.samples)

    @property
    def positive_index(self) -> int:
        return self.analyte_names.index(self.positive_analyte)

    @property
    def sample_rate(self) -> float:
        return self.samples[0].sample_rate if self.samples else DEFAULT_SAMPLE_RATE

    @property
    def n_channels(self) -> int:
        return self.samples[0].n_channels

    @property
    def min_length(self) -> int:
        return min(s.length for s in self.samples)

    def labels(self) -> np.ndarray:
        """Binary labels, True where the positive analyte is present."""
        return np.array([binary_label(s, self.positive_index) for s in self.samples], dtype=bool)

    def subset(self, ids: Iterable[str], name: str | None = None) -> "Dataset":
        by_id = {s.id: s for s in self.samples}
        try:
            chosen = [by_id[i] for i in ids]
        except KeyError as exc:
            raise DataError(f"unknown sample id {exc.args[0]!r} in dataset {self.name!r}") from None
        return replace(self, name=name or self.name, samples=tuple(chosen))

    def truncated(self, length: int) -> "Dataset":
        """Every sample cut to its length-`length` prefix (clipped to the sample's own length)."""
        return replace(self, samples=tuple(prefix(s, min(length, s.length)) for s in self.samples))

    def stack(self) -> np.ndarray:
        """Channels as an (n, k, T) array; samples must share a length."""
        lengths = {s.length for s in self.samples}
        if len(lengths) != 1:
            raise DataError(f"dataset {self.name!r} has ragged lengths {sorted(lengths)}")
        return np.stack([s.channels for s in self.samples])


def binary_label(sample: MTSample, positive_index: int) -> bool:
    return bool(sample.concentrations[positive_index] > 0)


def prefix(x: MTSample, l: int) -> MTSample:
    """First `l` timesteps of every channel; metadata kept, onset clamped."""
    if not 1 <= l <= x.length:
        raise IndexError(f"prefix length {l} outside [1, {x.length}]")
    if l == x.length:
        return x
    onset = min(x.onset_index, l)
    return MTSample(
        id=x.id,
        channels=x.channels[:, :l],
        onset_index=onset,
        concentrations=x.concentrations,
        sample_rate=x.sample_rate,
    )


def f1_score(preds: Sequence[bool], truth: Sequence[bool]) -> float:
    """Binary F1 over the positive class; 0 when there are no positives anywhere."""
    p = np.asarray(preds, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"prediction/truth length mismatch: {p.shape} vs {t.shape}")
    if len(p) == 0:
        raise ValueError("f1_score needs at least one pair")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def seconds_to_steps(s: float, rate: float = DEFAULT_SAMPLE_RATE) -> int:
    if s < 0 or not rate > 0:
        raise ValueError(f"need s >= 0 and rate > 0, got s={s}, rate={rate}")
    steps = int(round(s * rate))
    return max(steps, 1) if s > 0 else 0


@dataclass(frozen=True)
class PredictionResult:
    label: bool
    decision_distance: float
    prefix_len: int
    infer_seconds: float = 0.0


@dataclass
class ChannelStandardizer:
    """Per-channel z-scoring with statistics taken from a training split only."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    std: np.ndarray = field(default_factory=lambda: np.ones(0))

    @classmethod
    def fit(cls, samples: Sequence[MTSample]) -> "ChannelStandardizer":
        cat = np.concatenate([s.channels for s in samples], axis=1)
        mean = cat.mean(axis=1)
        std = cat.std(axis=1)
        std[std < 1e-12] = 1.0
        return cls(mean=mean, std=std)

    def transform(self, channels: np.ndarray) -> np.ndarray:
        """Works on (k, T) or (n, k, T)."""
        return (channels - self.mean[:, None]) / self.std[:, None]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelStandardizer":
        return cls(mean=np.array(d["mean"], dtype=float), std=np.array(d["std"], dtype=float))


# ---------------------------------------------------------------------------
# Dataset file format (JSON document, channel-major arrays)


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "name": ds.name,
        "sample_rate_hz": ds.sample_rate,
        "analytes": list(ds.analyte_names),
        "positive_analyte": ds.positive_analyte,
        "samples": [
            {
                "id": s.id,
                "onset_index": s.onset_index,
                "concentrations": s.concentrations.tolist(),
                "channels": s.channels.tolist(),
            }
            for s in ds.samples
        ],
    }


def dataset_from_dict(doc: dict) -> Dataset:
    try:
        rate = float(doc["sample_rate_hz"])
        samples = [
            MTSample(
                id=str(s["id"]),
                channels=np.array(s["channels"], dtype=float),
                onset_index=int(s["onset_index"]),
                concentrations=np.array(s["concentrations"], dtype=float),
                sample_rate=rate,
            )
            for s in doc["samples"]
        ]
        return Dataset(
            name=str(doc["name"]),
            analyte_names=tuple(doc["analytes"]),
            samples=tuple(samples),
            positive_analyte=str(doc["positive_analyte"]),
        )
    except KeyError as exc:
        raise DataError(f"dataset file missing field {exc.args[0]!r}") from None


def dumps_json(doc) -> str:
    # repr-based float output round-trips bit-exactly
    return json.dumps(doc, allow_nan=False, separators=(",", ":"))


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_json(dataset_to_dict(ds)) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid dataset document ({exc})") from None
    return dataset_from_dict(doc)


def isfinite_all(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "ChannelStandardizer",
    "DataError",
    "Dataset",
    "MTSample",
    "PredictionResult",
    "binary_label",
    "dataset_from_dict",
    "dataset_to_dict",
    "dumps_json",
    "f1_score",
    "load_dataset",
    "prefix",
    "save_dataset",
    "seconds_to_steps",
]
