"""Synthetic chemiresistive sensor-array exposures.

Each sensor follows first-order adsorption kinetics: once analyte flux starts,
the resistance relaxes exponentially from its baseline toward
``baseline + affinity * concentration`` with a per-(sensor, analyte) time
constant. A linear drift and white Gaussian noise are added on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_SAMPLE_RATE, Dataset, MTSample, seconds_to_steps

DEFAULT_ANALYTES = ("A", "B", "C", "D")
N_PRESETS = 11


@dataclass(frozen=True)
class SensorArraySpec:
    baselines: np.ndarray  # (k,) ohms
    affinity: np.ndarray  # (k, A) ohms per percent
    tau: np.ndarray  # (k, A) seconds
    noise_sigma: float = 0.0
    drift_slope: float = 0.0

    def __post_init__(self):
        baselines = np.asarray(self.baselines, dtype=float)
        affinity = np.atleast_2d(np.asarray(self.affinity, dtype=float))
        tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        if affinity.shape != tau.shape or affinity.shape[0] != baselines.shape[0]:
            raise ValueError(
                f"shape mismatch: baselines {baselines.shape}, affinity {affinity.shape}, tau {tau.shape}"
            )
        if np.any(tau <= 0):
            raise ValueError("time constants must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        object.__setattr__(self, "baselines", baselines)
        object.__setattr__(self, "affinity", affinity)
        object.__setattr__(self, "tau", tau)

    @property
    def k(self) -> int:
        return self.baselines.shape[0]

    @property
    def n_analytes(self) -> int:
        return self.affinity.shape[1]


def random_array_spec(seed: int, k: int = 8, n_analytes: int = 4) -> SensorArraySpec:
    """A randomized array: kOhm-scale baselines, signed affinities up to ~0.4%/percent, 80 ohm noise."""
    rng = np.random.default_rng([seed, 0x5E45])
    baselines = rng.uniform(1_000.0, 10_000.0, size=k)
    affinity = baselines[:, None] * 4e-3 * rng.uniform(-1.0, 1.0, size=(k, n_analytes))
    tau = rng.uniform(0.3, 2.0, size=(k, n_analytes))
    return SensorArraySpec(
        baselines=baselines,
        affinity=affinity,
        tau=tau,
        noise_sigma=80.0,
        drift_slope=0.5,
    )


@dataclass(frozen=True)
class SimConfig:
    array_spec: SensorArraySpec
    analyte_names: tuple[str, ...] = DEFAULT_ANALYTES
    positive_analyte: str = "A"
    n_train: int = 100
    n_test: int = 32
    duration_s: float = 5.0
    onset_s: float = 1.0
    concentration_range: tuple[float, float] = (10.0, 25.0)
    seed: int = 0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    name: str = "synthetic"
    analyte_weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if not self.onset_s < self.duration_s:
            raise ValueError("onset_s must precede duration_s")
        if self.n_train <= 0 or self.n_test <= 0:
            raise ValueError("sample counts must be positive")
        if len(self.analyte_names) != self.array_spec.n_analytes:
            raise ValueError(
                f"{len(self.analyte_names)} analyte names for an array with {self.array_spec.n_analytes} analytes"
            )
        lo, hi = self.concentration_range
        if not 0 <= lo <= hi:
            raise ValueError(f"bad concentration range {self.concentration_range}")


def preset_config(index: int = 0, **overrides) -> SimConfig:
    """One of the 11 default array configurations (seeded 0..10)."""
    if not 0 <= index < N_PRESETS:
        raise ValueError(f"preset index must be in [0, {N_PRESETS})")
    kwargs = dict(array_spec=random_array_spec(index), seed=index, name=f"preset{index:02d}")
    kwargs.update(overrides)
    return SimConfig(**kwargs)


def response_curve(
    spec: SensorArraySpec,
    analyte: int,
    conc: float,
    T: int,
    onset: int,
    rate: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """k x T resistance matrix for one single-analyte exposure."""
    if not 0 <= analyte < spec.n_analytes:
        raise IndexError(f"analyte index {analyte} out of range")
    if conc < 0:
        raise ValueError("concentration must be >= 0")
    t = np.arange(T, dtype=float)
    elapsed = np.maximum(t - onset, 0.0)
    rise = 1.0 - np.exp(-elapsed[None, :] / (rate * spec.tau[:, analyte][:, None]))
    rise[:, t < onset] = 0.0
    out = (
        spec.baselines[:, None]
        + spec.drift_slope * t[None, :] / rate
        + spec.affinity[:, analyte][:, None] * conc * rise
    )
    if spec.noise_sigma > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_sigma > 0")
        out = out + rng.normal(0.0, spec.noise_sigma, size=out.shape)
    return out


def _balanced_analytes(rng: np.random.Generator, n: int, n_analytes: int, weights=None) -> np.ndarray:
    # near-exact class balance: whole cycles of analytes, remainder drawn without replacement
    if weights is not None:
        p = np.asarray(weights, dtype=float)
        return rng.choice(n_analytes, size=n, p=p / p.sum())
    full, rem = divmod(n, n_analytes)
    idx = np.concatenate([np.tile(np.arange(n_analytes), full), rng.choice(n_analytes, size=rem, replace=False)])
    return rng.permutation(idx).astype(int)


def _draw_split(cfg: SimConfig, rng: np.random.Generator, n: int, prefix_id: str, name: str) -> Dataset:
    spec = cfg.array_spec
    T = seconds_to_steps(cfg.duration_s, cfg.sample_rate)
    onset = seconds_to_steps(cfg.onset_s, cfg.sample_rate)
    analytes = _balanced_analytes(rng, n, spec.n_analytes, cfg.analyte_weights)
    lo, hi = cfg.concentration_range
    samples = []
    for i, a in enumerate(analytes):
        conc = float(rng.uniform(lo, hi))
        channels = response_curve(spec, int(a), conc, T, onset, cfg.sample_rate, rng)
        concentrations = np.zeros(spec.n_analytes)
        concentrations[a] = conc
        samples.append(
            MTSample(
                id=f"{prefix_id}{i:04d}",
                channels=channels,
                onset_index=onset,
                concentrations=concentrations,
                sample_rate=cfg.sample_rate,
            )
        )
    return Dataset(
        name=name,
        analyte_names=tuple(cfg.analyte_names),
        samples=tuple(samples),
        positive_analyte=cfg.positive_analyte,
    )


def generate_dataset(cfg: SimConfig) -> tuple[Dataset, Dataset]:
    """Deterministic (train, test) pair; the two splits use independent RNG streams."""
    train_seq, test_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    train = _draw_split(cfg, np.random.default_rng(train_seq), cfg.n_train, "train-", cfg.name)
    test = _draw_split(cfg, np.random.default_rng(test_seq), cfg.n_test, "test-", cfg.name)
    return train, test
