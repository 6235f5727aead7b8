"""Early classification of chemiresistive sensor-array time series.

Submodules: ``core`` (types, metrics, dataset files), ``simgen`` (synthetic
arrays), ``encoder`` / ``embedding`` / ``margin`` (the recurrent embedder and
its boost classifier), ``baselines``, ``evaluation`` and ``cli``.
"""

from .core import Dataset, MTSample, PredictionResult, f1_score, prefix, seconds_to_steps
from .embedding import EmbeddingTable, build_target_sequence, default_table
from .encoder import (
    ChemTimeClassifier,
    ChemTimeModel,
    TrainConfig,
    calibrate_early_window,
    fit_boost,
    forward,
    predict,
    sequence_loss,
    train,
)
from .simgen import SensorArraySpec, SimConfig, generate_dataset, preset_config, response_curve

__version__ = "0.1.0"
