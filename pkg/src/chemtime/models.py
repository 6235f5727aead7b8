"""Model registry and the shared JSON model container (``{"kind": ..., "params": ...}``)."""

from __future__ import annotations

import json
from pathlib import Path

from .baselines import BASELINES, TEST_HOOKS
from .core import DataError, dumps_json
from .encoder import ChemTimeClassifier

REGISTRY = {"chemtime": ChemTimeClassifier, **BASELINES, **TEST_HOOKS}
DEFAULT_ROSTER = ("chemtime", "rocket", "knn_concat", "ridge_concat", "interval_tree", "nn1_ensemble")


def make_model(name: str, seed: int = 0, **options):
    """Fresh, unfitted classifier by registry name."""
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(REGISTRY)}") from None
    return cls(seed=seed, **options)


def model_to_container(model) -> dict:
    return {"kind": model.kind, "params": model.to_dict()}


def model_from_container(doc: dict):
    try:
        cls = REGISTRY[doc["kind"]]
    except KeyError:
        raise DataError(f"unknown or missing model kind {doc.get('kind')!r}") from None
    return cls.from_dict(doc["params"])


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(dumps_json(model_to_container(model)) + "\n")


def load_model(path: str | Path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None
    return model_from_container(doc)
