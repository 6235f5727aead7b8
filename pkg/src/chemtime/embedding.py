"""Analyte embedding tables and per-timestep target sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import DataError, MTSample, dumps_json

NONE_KEY = "None"


@dataclass(frozen=True)
class EmbeddingTable:
    """Analyte name -> d-dimensional latent vector. Must hold a "None" (carrier gas) entry."""

    dim: int
    entries: Mapping[str, np.ndarray]

    def __post_init__(self):
        if NONE_KEY not in self.entries:
            raise DataError(f"embedding table needs a {NONE_KEY!r} entry")
        frozen = {}
        for name, vec in self.entries.items():
            v = np.array(vec, dtype=float)
            if v.shape != (self.dim,):
                raise DataError(f"embedding {name!r} has shape {v.shape}, expected ({self.dim},)")
            v.flags.writeable = False
            frozen[str(name)] = v
        object.__setattr__(self, "entries", frozen)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def matrix(self) -> np.ndarray:
        """Entries stacked in `names` order."""
        return np.stack([self.entries[n] for n in self.names])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"analyte {name!r} missing from embedding table") from None

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.entries[name]
        except KeyError:
            raise KeyError(f"analyte {name!r} missing from embedding table") from None

    def to_dict(self) -> dict:
        return {"dim": self.dim, "entries": {k: v.tolist() for k, v in self.entries.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingTable":
        return cls(dim=int(d["dim"]), entries={k: np.array(v, dtype=float) for k, v in d["entries"].items()})


def default_table(analyte_names: Sequence[str] = ("A", "B", "C", "D")) -> EmbeddingTable:
    """2-d table: "None" at the origin, analytes evenly spaced on the unit circle."""
    angles = 2 * np.pi * np.arange(len(analyte_names)) / len(analyte_names)
    entries = {NONE_KEY: np.zeros(2)}
    for name, a in zip(analyte_names, angles):
        entries[name] = np.array([np.cos(a), np.sin(a)])
    return EmbeddingTable(dim=2, entries=entries)


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    Path(path).write_text(dumps_json(table.to_dict()) + "\n")


def load_table(path: str | Path) -> EmbeddingTable:
    return EmbeddingTable.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TargetSequence:
    targets: np.ndarray  # (T, d)
    entry_index: np.ndarray  # (T,) row of the table each step targets

    @property
    def length(self) -> int:
        return self.targets.shape[0]


def build_target_sequence(sample: MTSample, table: EmbeddingTable, analyte_names: Sequence[str]) -> TargetSequence:
    """"None" before flux onset, the exposed analyte's vector from onset on."""
    for name in analyte_names:
        table.index(name)
    if len(sample.concentrations) != len(analyte_names):
        raise DataError(f"sample {sample.id!r} has {len(sample.concentrations)} concentrations for {len(analyte_names)} analytes")
    exposed = sample.exposed_analyte()
    none_idx = table.index(NONE_KEY)
    idx = np.full(sample.length, none_idx, dtype=int)
    if exposed is not None:
        idx[sample.onset_index :] = table.index(analyte_names[exposed])
    return TargetSequence(targets=table.matrix()[idx], entry_index=idx)
