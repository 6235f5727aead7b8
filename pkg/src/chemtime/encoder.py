"""Recurrent moving-target embedder.

A gated recurrent cell reads standardized resistance columns one step at a
time; a linear projection maps every hidden state into the analyte embedding
space. Training pulls each step's embedding toward a target that is the
carrier-gas ("None") vector before flux onset and the exposed analyte's vector
afterwards. The per-step losses are summed over the sequence.

Parameter layout (H hidden units, k channels, d embedding dims)::

    W_z, W_r, W_n : (H, k)    input weights for update / reset / candidate
    U_z, U_r, U_n : (H, H)    recurrent weights
    b_z, b_r, b_n : (H,)
    W_p : (d, H), b_p : (d,)  projection to the embedding space
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import ChannelStandardizer, Dataset, MTSample, PredictionResult, f1_score, prefix
from .embedding import NONE_KEY, EmbeddingTable, TargetSequence, build_target_sequence, default_table
from .margin import DegenerateFitError, LinearMargin, fit_linear_margin

log = logging.getLogger(__name__)

LOSS_KINDS = ("squared", "cosine", "hinge_rank")
CELL_KEYS = ("W_z", "W_r", "W_n", "U_z", "U_r", "U_n", "b_z", "b_r", "b_n")
PARAM_KEYS = CELL_KEYS + ("W_p", "b_p")


class TrainingDivergenceError(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"training diverged at epoch {epoch} (mean loss {value})")
        self.epoch = epoch


@dataclass(frozen=True)
class NearestTarget:
    """Classifies an embedding by its nearest table entry."""

    table: EmbeddingTable
    positive: str

    def decision_function(self, E: np.ndarray) -> np.ndarray:
        # distance to the closest non-positive entry minus distance to the positive entry
        M = self.table.matrix()
        pos = self.table.index(self.positive)
        d = np.linalg.norm(np.atleast_2d(E)[:, None, :] - M[None, :, :], axis=2)
        others = np.delete(d, pos, axis=1).min(axis=1)
        return others - d[:, pos]

    def predict(self, E: np.ndarray) -> np.ndarray:
        return self.decision_function(E) > 0

    def nearest(self, e: np.ndarray) -> str:
        d = np.linalg.norm(self.table.matrix() - np.asarray(e)[None, :], axis=1)
        return self.table.names[int(np.argmin(d))]


@dataclass(frozen=True)
class ChemTimeModel:
    params: dict
    table: EmbeddingTable
    standardizer: ChannelStandardizer
    loss_kind: str = "squared"
    positive_analyte: str | None = None
    boost: LinearMargin | NearestTarget | None = None
    analyte_names: tuple[str, ...] = ()

    @property
    def hidden_size(self) -> int:
        return self.params["U_z"].shape[0]

    @property
    def input_size(self) -> int:
        return self.params["W_z"].shape[1]

    @property
    def dim(self) -> int:
        return self.params["W_p"].shape[0]


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray  # (T, d)
    distances: np.ndarray | None = None  # (T,)


@dataclass
class TrainConfig:
    hidden: int = 32
    lr: float = 1e-2
    epochs: int = 50
    batch: int = 8
    loss_kind: str = "squared"
    seed: int = 0
    clip: float = 5.0
    margin: float = 0.1
    boost: str = "margin"  # or "nearest_target"
    boost_lambda: float = 1e-3
    step_weights: Sequence[float] | None = None


@dataclass
class TrainHistory:
    epoch_loss: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# recurrent cell


def init_params(k: int, hidden: int, dim: int, rng: np.random.Generator) -> dict:
    s = 1.0 / np.sqrt(hidden)
    shapes = {
        "W_z": (hidden, k), "W_r": (hidden, k), "W_n": (hidden, k),
        "U_z": (hidden, hidden), "U_r": (hidden, hidden), "U_n": (hidden, hidden),
        "b_z": (hidden,), "b_r": (hidden,), "b_n": (hidden,),
        "W_p": (dim, hidden), "b_p": (dim,),
    }  # fmt: skip
    return {name: rng.uniform(-s, s, size=shape) for name, shape in shapes.items()}


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def cell_step(params: dict, h_prev: np.ndarray, x: np.ndarray):
    """One gated update on a batch: x (B, k), h_prev (B, H) -> (h, cache)."""
    z = _sigmoid(x @ params["W_z"].T + h_prev @ params["U_z"].T + params["b_z"])
    r = _sigmoid(x @ params["W_r"].T + h_prev @ params["U_r"].T + params["b_r"])
    rh = r * h_prev
    n = np.tanh(x @ params["W_n"].T + rh @ params["U_n"].T + params["b_n"])
    h = (1.0 - z) * n + z * h_prev
    return h, (x, h_prev, z, r, rh, n)


def project(params: dict, h: np.ndarray) -> np.ndarray:
    return h @ params["W_p"].T + params["b_p"]


def run_sequence(params: dict, X: np.ndarray):
    """X (B, T, k) already standardized -> embeddings (B, T, d), hidden states, caches."""
    B, T, _ = X.shape
    h = np.zeros((B, params["U_z"].shape[0]))
    hs, es, caches = [], [], []
    for t in range(T):
        h, cache = cell_step(params, h, X[:, t, :])
        # projecting step by step keeps the arithmetic identical to step()
        hs.append(h)
        es.append(project(params, h))
        caches.append(cache)
    return np.stack(es, axis=1), np.stack(hs, axis=1), caches


def backprop(params: dict, H: np.ndarray, caches: list, dE: np.ndarray) -> dict:
    """Gradients of a loss given dLoss/dEmbedding (B, T, d), by backprop through time."""
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["W_p"] = np.einsum("btd,bth->dh", dE, H)
    grads["b_p"] = dE.sum(axis=(0, 1))
    dH = dE @ params["W_p"]
    dh_next = np.zeros_like(H[:, 0, :])
    for t in range(H.shape[1] - 1, -1, -1):
        x, h_prev, z, r, rh, n = caches[t]
        dh = dH[:, t, :] + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z
        da_n = dn * (1.0 - n * n)
        grads["W_n"] += da_n.T @ x
        grads["U_n"] += da_n.T @ rh
        grads["b_n"] += da_n.sum(axis=0)
        drh = da_n @ params["U_n"]
        dr = drh * h_prev
        dh_prev += drh * r
        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        grads["W_z"] += da_z.T @ x
        grads["U_z"] += da_z.T @ h_prev
        grads["b_z"] += da_z.sum(axis=0)
        grads["W_r"] += da_r.T @ x
        grads["U_r"] += da_r.T @ h_prev
        grads["b_r"] += da_r.sum(axis=0)
        dh_prev += da_z @ params["U_z"] + da_r @ params["U_r"]
        dh_next = dh_prev
    return grads


# ---------------------------------------------------------------------------
# losses


def step_losses(
    E: np.ndarray,
    Y: np.ndarray,
    kind: str,
    table_matrix: np.ndarray | None = None,
    entry_index: np.ndarray | None = None,
    margin: float = 0.1,
):
    """Per-step losses and their gradient w.r.t. E. E, Y: (..., d)."""
    if kind == "squared":
        diff = E - Y
        return np.sum(diff * diff, axis=-1), 2.0 * diff
    if kind == "cosine":
        ne = np.linalg.norm(E, axis=-1, keepdims=True)
        ny = np.linalg.norm(Y, axis=-1, keepdims=True)
        ok = (ne > 0) & (ny > 0)
        safe_ne = np.where(ok, ne, 1.0)
        safe_ny = np.where(ok, ny, 1.0)
        dot = np.sum(E * Y, axis=-1, keepdims=True)
        cos = dot / (safe_ne * safe_ny)
        loss = np.where(ok, 1.0 - cos, 0.0)[..., 0]
        grad = -(Y / (safe_ne * safe_ny) - cos * E / (safe_ne * safe_ne))
        return loss, np.where(ok, grad, 0.0)
    if kind == "hinge_rank":
        if table_matrix is None or entry_index is None:
            raise ValueError("hinge_rank loss needs the table matrix and per-step entry indices")
        scores = E @ table_matrix.T  # (..., m)
        true_score = np.sum(E * Y, axis=-1, keepdims=True)
        viol = margin - true_score + scores
        own = np.arange(table_matrix.shape[0]) == entry_index[..., None]
        viol = np.where(own, 0.0, viol)
        active = viol > 0
        loss = np.sum(np.where(active, viol, 0.0), axis=-1)
        count = active.sum(axis=-1, keepdims=True)
        grad = active.astype(float) @ table_matrix - count * Y
        return loss, grad
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def sequence_loss(
    traj: Trajectory | np.ndarray,
    targets: TargetSequence,
    kind: str = "squared",
    table: EmbeddingTable | None = None,
    margin: float = 0.1,
    step_weights: np.ndarray | None = None,
) -> float:
    """Sum over timesteps of the per-step embedding loss."""
    E = traj.points if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if E.shape != targets.targets.shape:
        raise ValueError(f"trajectory shape {E.shape} does not match targets {targets.targets.shape}")
    M = table.matrix() if table is not None else None
    losses, _ = step_losses(E, targets.targets, kind, M, targets.entry_index, margin)
    if step_weights is not None:
        losses = losses * np.asarray(step_weights, dtype=float)
    return float(np.sum(losses))


def loss_and_grads(params: dict, X: np.ndarray, Y: np.ndarray, idx: np.ndarray, kind: str, table_matrix, margin=0.1, step_weights=None):
    """Batch-mean of the summed sequence loss, and its parameter gradients."""
    E, H, caches = run_sequence(params, X)
    losses, dE = step_losses(E, Y, kind, table_matrix, idx, margin)
    if step_weights is not None:
        w = np.asarray(step_weights, dtype=float)[None, :]
        losses = losses * w
        dE = dE * w[..., None]
    per_sample = losses.sum(axis=1)
    B = X.shape[0]
    grads = backprop(params, H, caches, dE / B)
    return per_sample, grads


# ---------------------------------------------------------------------------
# training


def _prepare(dataset: Dataset, table: EmbeddingTable, standardizer: ChannelStandardizer):
    X = standardizer.transform(dataset.stack()).transpose(0, 2, 1)
    seqs = [build_target_sequence(s, table, dataset.analyte_names) for s in dataset.samples]
    Y = np.stack([q.targets for q in seqs])
    idx = np.stack([q.entry_index for q in seqs])
    return X, Y, idx


def train(dataset: Dataset, table: EmbeddingTable, cfg: TrainConfig | None = None, history: TrainHistory | None = None) -> ChemTimeModel:
    """Fit the recurrent embedder by mini-batch gradient descent (no boost)."""
    cfg = cfg or TrainConfig()
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.loss_kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {cfg.loss_kind!r}")
    rng = np.random.default_rng(cfg.seed)
    standardizer = ChannelStandardizer.fit(dataset.samples)
    X, Y, idx = _prepare(dataset, table, standardizer)
    M = table.matrix()
    params = init_params(dataset.n_channels, cfg.hidden, table.dim, rng)
    history = history if history is not None else TrainHistory()
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch):
            b = order[start : start + cfg.batch]
            per_sample, grads = loss_and_grads(params, X[b], Y[b], idx[b], cfg.loss_kind, M, cfg.margin, cfg.step_weights)
            total += float(per_sample.sum())
            gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if not np.isfinite(gnorm):
                raise TrainingDivergenceError(epoch, float("nan"))
            scale = cfg.lr * (min(1.0, cfg.clip / gnorm) if gnorm > 0 else 1.0)
            if scale != 0.0:
                for name in params:
                    params[name] -= scale * grads[name]
        mean_loss = total / n
        if not np.isfinite(mean_loss):
            raise TrainingDivergenceError(epoch, mean_loss)
        history.epoch_loss.append(mean_loss)
        log.debug("epoch %d mean loss %.5f", epoch, mean_loss)
    return ChemTimeModel(
        params=params,
        table=table,
        standardizer=standardizer,
        loss_kind=cfg.loss_kind,
        positive_analyte=dataset.positive_analyte,
        analyte_names=tuple(dataset.analyte_names),
    )


# ---------------------------------------------------------------------------
# inference


def _check_input(model: ChemTimeModel, sample: MTSample):
    if sample.n_channels != model.input_size:
        raise ValueError(f"sample {sample.id!r} has {sample.n_channels} channels; model expects {model.input_size}")


def forward(model: ChemTimeModel, sample: MTSample) -> Trajectory:
    """Embedding after every timestep of the sample (plus margins when a boost is fit)."""
    _check_input(model, sample)
    X = model.standardizer.transform(sample.channels).T[None, :, :]
    E, _, _ = run_sequence(model.params, X)
    points = E[0]
    distances = model.boost.decision_function(points) if model.boost is not None else None
    return Trajectory(points=points, distances=distances)


def step(model: ChemTimeModel, h_prev: np.ndarray | None, x_raw: np.ndarray):
    """Advance one raw resistance column: (h_prev, x_t) -> (h_t, e_t)."""
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.shape != (model.input_size,):
        raise ValueError(f"column has shape {x_raw.shape}; model expects ({model.input_size},)")
    if h_prev is None:
        h_prev = np.zeros(model.hidden_size)
    x = ((x_raw - model.standardizer.mean) / model.standardizer.std)[None, :]
    h, _ = cell_step(model.params, np.asarray(h_prev, dtype=float)[None, :], x)
    return h[0], project(model.params, h)[0]


def final_embeddings(model: ChemTimeModel, samples: Sequence[MTSample]) -> np.ndarray:
    return np.stack([forward(model, s).points[-1] for s in samples])


def fit_boost(model: ChemTimeModel, train_ds: Dataset, mode: str = "margin", lam: float = 1e-3) -> ChemTimeModel:
    """Attach a positive-vs-rest classifier on the final-step embeddings."""
    y = train_ds.labels()
    if y.all() or not y.any():
        raise DegenerateFitError("boost needs both positive and negative training samples")
    if mode == "nearest_target":
        boost = NearestTarget(model.table, train_ds.positive_analyte)
    elif mode == "margin":
        E = final_embeddings(model, train_ds.samples)
        boost = fit_linear_margin(E, np.where(y, 1.0, -1.0), lam=lam)
    else:
        raise ValueError(f"unknown boost mode {mode!r}")
    return replace(model, boost=boost, positive_analyte=train_ds.positive_analyte)


def predict(model: ChemTimeModel, sample: MTSample, prefix_len: int | None = None) -> PredictionResult:
    if model.boost is None:
        raise ValueError("model has no boost classifier; call fit_boost first")
    prefix_len = sample.length if prefix_len is None else prefix_len
    start = time.perf_counter()
    traj = forward(model, prefix(sample, prefix_len))
    dist = float(model.boost.decision_function(traj.points[-1:])[0])
    elapsed = time.perf_counter() - start
    return PredictionResult(label=dist > 0, decision_distance=dist, prefix_len=prefix_len, infer_seconds=elapsed)


def distance_profile(model: ChemTimeModel, samples: Sequence[MTSample]) -> np.ndarray:
    """(n, T) signed margins at every prefix length; column l-1 is prefix l."""
    return np.stack([forward(model, s).distances for s in samples])


def calibrate_early_window(model: ChemTimeModel, validation: Dataset, f1_floor: float) -> int:
    """Smallest prefix length from which validation F1 never drops below the floor."""
    if len(validation) == 0:
        raise ValueError("validation set is empty")
    if not 0 < f1_floor <= 1:
        raise ValueError("f1_floor must be in (0, 1]")
    if model.boost is None:
        raise ValueError("model has no boost classifier")
    T = validation.min_length
    D = distance_profile(model, [prefix(s, T) for s in validation.samples])
    return earliest_stable_prefix(D > 0, validation.labels(), f1_floor)


def earliest_stable_prefix(pred_by_prefix: np.ndarray, truth: np.ndarray, f1_floor: float) -> int:
    """pred_by_prefix: (n, T) labels per prefix length. Returns T when no suffix qualifies."""
    T = pred_by_prefix.shape[1]
    scores = np.array([f1_score(pred_by_prefix[:, l], truth) for l in range(T)])
    best = T
    for l in range(T, 0, -1):
        if scores[l - 1] < f1_floor:
            break
        best = l
    return best


# ---------------------------------------------------------------------------
# classifier wrapper used by the evaluation harness


class ChemTimeClassifier:
    """Embedder + boost behind the fit/predict interface shared with the baselines."""

    kind = "chemtime"
    supports_prefix = True

    def __init__(self, table: EmbeddingTable | None = None, config: TrainConfig | None = None, **overrides):
        self.table = table
        self.config = replace(config or TrainConfig(), **overrides)
        self.model: ChemTimeModel | None = None

    def fit(self, ds: Dataset) -> "ChemTimeClassifier":
        table = self.table or default_table(ds.analyte_names)
        if NONE_KEY not in table.entries:
            raise ValueError("embedding table lacks a None entry")
        model = train(ds, table, self.config)
        self.model = fit_boost(model, ds, mode="nearest_target" if self.config.boost == "nearest_target" else "margin",
                               lam=self.config.boost_lambda)
        return self

    def decision_function(self, samples: Sequence[MTSample]) -> np.ndarray:
        E = final_embeddings(self.model, samples)
        return self.model.boost.decision_function(E)

    def predict(self, samples: Sequence[MTSample]) -> np.ndarray:
        return self.decision_function(samples) > 0

    def predict_prefix(self, samples: Sequence[MTSample], length: int) -> np.ndarray:
        return self.predict([prefix(s, min(length, s.length)) for s in samples])

    def labels_by_prefix(self, samples: Sequence[MTSample]) -> np.ndarray:
        """(n, T) predictions for every prefix length, from one pass per sample."""
        return distance_profile(self.model, samples) > 0

    def to_dict(self) -> dict:
        cfg = {k: v for k, v in vars(self.config).items()}
        if cfg["step_weights"] is not None:
            cfg["step_weights"] = list(cfg["step_weights"])
        return {"config": cfg, "model": model_to_dict(self.model)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChemTimeClassifier":
        model = model_from_dict(d["model"])
        obj = cls(table=model.table, config=TrainConfig(**d["config"]))
        obj.model = model
        return obj


def model_to_dict(model: ChemTimeModel) -> dict:
    if isinstance(model.boost, LinearMargin):
        boost = {"mode": "margin", **model.boost.to_dict()}
    elif isinstance(model.boost, NearestTarget):
        boost = {"mode": "nearest_target", "positive": model.boost.positive}
    else:
        boost = None
    return {
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in model.params.items()},
        "table": model.table.to_dict(),
        "standardizer": model.standardizer.to_dict(),
        "loss_kind": model.loss_kind,
        "positive_analyte": model.positive_analyte,
        "analyte_names": list(model.analyte_names),
        "boost": boost,
    }


def model_from_dict(d: dict) -> ChemTimeModel:
    missing = [k for k in PARAM_KEYS if k not in d["params"]]
    if missing:
        raise ValueError(f"model file lacks parameters {missing}")
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["params"].items()}
    table = EmbeddingTable.from_dict(d["table"])
    b = d.get("boost")
    if b is None:
        boost = None
    elif b["mode"] == "margin":
        boost = LinearMargin.from_dict(b)
    else:
        boost = NearestTarget(table, b["positive"])
    return ChemTimeModel(
        params=params,
        table=table,
        standardizer=ChannelStandardizer.from_dict(d["standardizer"]),
        loss_kind=d["loss_kind"],
        positive_analyte=d.get("positive_analyte"),
        boost=boost,
        analyte_names=tuple(d.get("analyte_names", ())),
    )
