"""Classifiers over signature features: a value scorer and an op ranker.

Both are small embed-then-dense networks trained in-process with hand-written
backpropagation on numpy arrays; they are far too small to justify an ML
runtime. The value scorer ("guidance") reads the 152-symbol concatenation of
task and value signatures and outputs one probability; the op ranker
("premise") reads the 107-symbol task signature and outputs one probability
per operation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dsl import OP_TABLE
from .sigs import FEATURE_LEN, IO_LEN, VO_LEN

NUM_SYMBOLS = 4  # ALL_FALSE, MIXED, ALL_TRUE, PADDING after the +1 shift
PARAMS_VERSION = 1

GUIDANCE = "guidance"
PREMISE = "premise"

_FEATURE_LENS = {GUIDANCE: FEATURE_LEN, PREMISE: IO_LEN}
_OUTPUT_DIMS = {GUIDANCE: 1, PREMISE: len(OP_TABLE)}
_DEFAULT_HIDDEN = {GUIDANCE: (256, 64), PREMISE: (512, 128)}

_PROB_EPS = 1e-12


class ModelIOError(Exception):
    """Weight file is malformed, truncated, or has an unsupported version."""


class DatasetError(ValueError):
    """Training data is empty or carries no usable label signal."""


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 8
    hidden: tuple[int, ...] | None = None  # None picks the per-kind default

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")
        if self.hidden is not None and any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")


@dataclass
class Layer:
    w: np.ndarray
    b: np.ndarray
    act: str  # "relu" or "logistic"


@dataclass
class ModelParams:
    kind: str
    embeddings: np.ndarray  # (NUM_SYMBOLS, embed_dim)
    layers: list[Layer]
    version: int = PARAMS_VERSION

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def feature_len(self) -> int:
        return _FEATURE_LENS[self.kind]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[1]


@dataclass(frozen=True)
class TrainRecord:
    """One labelled signature example; svo is absent for premise records."""

    sio: tuple[int, ...]
    svo: tuple[int, ...] | None
    label: int | tuple[int, ...]
    meta: dict | None = None


def init_params(kind: str, config: ModelConfig | None = None, seed: int = 0) -> ModelParams:
    """Deterministic random initialization for the given classifier kind."""
    if kind not in _FEATURE_LENS:
        raise ValueError(f"unknown model kind {kind!r}")
    config = config or ModelConfig()
    hidden = config.hidden if config.hidden is not None else _DEFAULT_HIDDEN[kind]
    rng = np.random.default_rng(seed)
    embeddings = rng.standard_normal((NUM_SYMBOLS, config.embed_dim))
    layers = []
    fan_in = _FEATURE_LENS[kind] * config.embed_dim
    for width in hidden:
        w = rng.standard_normal((fan_in, width)) * np.sqrt(2.0 / fan_in)
        layers.append(Layer(w, np.zeros(width), "relu"))
        fan_in = width
    out = _OUTPUT_DIMS[kind]
    w = rng.standard_normal((fan_in, out)) * np.sqrt(1.0 / fan_in)
    layers.append(Layer(w, np.zeros(out), "logistic"))
    return ModelParams(kind, embeddings, layers)


def encode_features(feature_rows) -> np.ndarray:
    """Symbol sequences (-1/0/1/2) to an embedding-index matrix (0..3)."""
    mat = np.asarray(feature_rows, dtype=np.int64)
    if mat.ndim != 2:
        raise ValueError("expected a batch of equal-length feature rows")
    mat = mat + 1
    if mat.min() < 0 or mat.max() >= NUM_SYMBOLS:
        raise ValueError("feature symbols must be in {-1, 0, 1, 2}")
    return mat


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_hiddens(params: ModelParams, idx: np.ndarray):
    """Activations per layer; the last entry is the output logits."""
    batch = idx.shape[0]
    h = params.embeddings[idx].reshape(batch, -1)
    acts = [h]
    for layer in params.layers:
        z = h @ layer.w + layer.b
        if layer.act == "relu":
            h = np.maximum(z, 0.0)
        else:
            h = z  # keep logits; probabilities are derived where needed
        acts.append(h)
    return acts


def forward_batch(params: ModelParams, feature_rows) -> np.ndarray:
    """Probabilities for a batch of symbol rows; row i depends only on row i.

    Returns shape (batch,) for the guidance model and (batch, num_ops) for
    the premise model, strictly inside (0, 1). Rows are independent by
    construction, but BLAS may pick different summation orders for different
    batch shapes, so recomputing a row in another batch can differ at the
    last float digit.
    """
    idx = encode_features(feature_rows)
    if idx.shape[1] != params.feature_len:
        raise ValueError(f"expected rows of {params.feature_len} symbols, got {idx.shape[1]}")
    logits = _forward_hiddens(params, idx)[-1]
    probs = np.clip(_sigmoid(logits), _PROB_EPS, 1.0 - _PROB_EPS)
    return probs[:, 0] if params.kind == GUIDANCE else probs


def loss_and_grads(params: ModelParams, idx: np.ndarray, labels: np.ndarray):
    """Mean binary cross-entropy and gradients for every parameter array.

    Returns (loss, grads) where grads mirrors params as
    (d_embeddings, [(d_w, d_b), ...]).
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 1:
        labels = labels[:, None]
    acts = _forward_hiddens(params, idx)
    logits = acts[-1]
    if logits.shape != labels.shape:
        raise ValueError(f"labels shape {labels.shape} does not match output {logits.shape}")
    # Stable elementwise BCE from logits: softplus(z) - y*z.
    loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))
    dz = (_sigmoid(logits) - labels) / labels.size
    layer_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)
    for li in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[li]
        layer_grads[li] = (acts[li].T @ dz, dz.sum(axis=0))
        dz = dz @ layer.w.T
        if li > 0:
            dz = dz * (acts[li] > 0.0)  # relu mask; acts[0] is the raw embedding concat
    d_emb_rows = dz.reshape(idx.shape[0], idx.shape[1], params.embed_dim)
    d_embeddings = np.zeros_like(params.embeddings)
    np.add.at(d_embeddings, idx.reshape(-1), d_emb_rows.reshape(-1, params.embed_dim))
    return loss, (d_embeddings, layer_grads)


class _Adam:
    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.arrays = arrays
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for a, g, m, v in zip(self.arrays, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            a -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def _flatten_grads(grads):
    d_emb, layer_grads = grads
    flat = [d_emb]
    for dw, db in layer_grads:
        flat.extend((dw, db))
    return flat


def _param_arrays(params: ModelParams):
    flat = [params.embeddings]
    for layer in params.layers:
        flat.extend((layer.w, layer.b))
    return flat


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-3
    val_fraction: float = 0.1
    model: ModelConfig | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC with average ranks on ties."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    start = 0
    for end in list(boundaries) + [scores.size]:
        ranks[order[start:end]] = 0.5 * (start + end + 1)
        start = end
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _records_to_arrays(records, kind: str):
    rows = []
    labels = []
    for rec in records:
        if kind == GUIDANCE:
            if rec.svo is None:
                raise DatasetError("guidance records need a value signature")
            rows.append(tuple(rec.sio) + tuple(rec.svo))
            labels.append(rec.label)
        else:
            rows.append(tuple(rec.sio))
            labels.append(tuple(rec.label))
    idx = encode_features(rows).astype(np.int8)
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    return idx, y


def _train(records, kind: str, config: TrainConfig, seed: int):
    records = list(records)
    if not records:
        raise DatasetError("empty dataset")
    idx, labels = _records_to_arrays(records, kind)
    if labels.min() == labels.max():
        raise DatasetError("dataset has a single label class")
    if kind == GUIDANCE and (labels.min() != 0.0 or labels.max() != 1.0):
        raise DatasetError("guidance labels must contain both 0 and 1")

    params = init_params(kind, config.model, seed)
    rng = np.random.default_rng(seed)
    n = len(records)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * config.val_fraction)))
    if n_val >= n:
        raise DatasetError("dataset too small to split")
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    arrays = _param_arrays(params)
    adam = _Adam(arrays, config.learning_rate)
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        batches = 0
        for start in range(0, order.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(params, idx[batch].astype(np.int64), labels[batch])
            adam.step(_flatten_grads(grads))
            total += loss
            batches += 1
        epoch_losses.append(total / max(batches, 1))

    val_x = idx[val_idx].astype(np.int64)
    val_y = labels[val_idx]
    val_loss, _ = loss_and_grads(params, val_x, val_y)
    probs = forward_batch(params, val_x - 1)
    probs2 = probs[:, None] if probs.ndim == 1 else probs
    accuracy = float(np.mean((probs2 > 0.5) == (val_y > 0.5)))
    auc = roc_auc(probs2.ravel(), val_y.ravel())
    metrics = {
        "records": n,
        "train_records": int(train_idx.size),
        "val_records": int(val_idx.size),
        "train_loss_per_epoch": epoch_losses,
        "val_loss": val_loss,
        "val_accuracy": accuracy,
        "val_auc": auc,
    }
    return params, metrics


def train_classifier(records, config: TrainConfig = TrainConfig(), seed: int = 0):
    """Train the intermediate-value scorer; returns (params, metrics)."""
    return _train(records, GUIDANCE, config, seed)


def train_op_classifier(records, config: TrainConfig = TrainConfig(), seed: int = 0):
    """Train the per-operation ranker on task signatures alone."""
    return _train(records, PREMISE, config, seed)


def save_params(params: ModelParams, path) -> None:
    payload = {
        "version": params.version,
        "kind": params.kind,
        "d": params.embed_dim,
        "embeddings": params.embeddings.tolist(),
        "layers": [
            {"w": layer.w.tolist(), "b": layer.b.tolist(), "act": layer.act}
            for layer in params.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_params(path) -> ModelParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"cannot read weight file {path}: {exc}") from exc
    try:
        version = payload["version"]
        if version != PARAMS_VERSION:
            raise ModelIOError(f"unsupported weight file version {version!r}")
        kind = payload["kind"]
        if kind not in _FEATURE_LENS:
            raise ModelIOError(f"unknown model kind {kind!r}")
        embeddings = np.asarray(payload["embeddings"], dtype=np.float64)
        layers = [
            Layer(np.asarray(spec["w"], dtype=np.float64),
                  np.asarray(spec["b"], dtype=np.float64),
                  spec["act"])
            for spec in payload["layers"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed weight file {path}: {exc}") from exc
    params = ModelParams(kind, embeddings, layers, version=version)
    _validate_params(params)
    return params


def _validate_params(params: ModelParams) -> None:
    if params.embeddings.shape[0] != NUM_SYMBOLS or params.embeddings.ndim != 2:
        raise ModelIOError("embedding table must have one row per symbol")
    if not params.layers:
        raise ModelIOError("weight file has no layers")
    fan_in = params.feature_len * params.embed_dim
    for layer in params.layers:
        if layer.act not in ("relu", "logistic"):
            raise ModelIOError(f"unknown activation {layer.act!r}")
        if layer.w.ndim != 2 or layer.w.shape[0] != fan_in:
            raise ModelIOError("layer shapes do not chain")
        if layer.b.shape != (layer.w.shape[1],):
            raise ModelIOError("bias shape mismatch")
        fan_in = layer.w.shape[1]
    if params.layers[-1].act != "logistic":
        raise ModelIOError("output layer must be logistic")
    if params.output_dim != _OUTPUT_DIMS[params.kind]:
        raise ModelIOError(
            f"{params.kind} model must output {_OUTPUT_DIMS[params.kind]} values")
    for arr in _param_arrays(params):
        if not np.all(np.isfinite(arr)):
            raise ModelIOError("weight file contains non-finite parameters")


class GuidanceScorer:
    """Batched value scoring for one task, tuned for the search loop.

    The task-side signature is constant for a whole search, so its
    contribution to the first dense layer is folded into a single bias
    vector up front; per value only the 45 value-signature positions are
    gathered and summed. Runs in float32: scores feed a coarse binning, so
    the precision loss is irrelevant, and it halves the memory traffic.
    """

    def __init__(self, params: ModelParams, sio_symbols):
        if params.kind != GUIDANCE:
            raise ValueError("scorer needs a guidance model")
        sio = tuple(sio_symbols)
        if len(sio) != IO_LEN:
            raise ValueError(f"expected {IO_LEN} task symbols")
        d = params.embed_dim
        emb = params.embeddings.astype(np.float32)
        w1 = params.layers[0].w.astype(np.float32)
        h1 = w1.shape[1]
        # position_tables[p, s, :] = contribution of symbol s at position p.
        per_pos = w1.reshape(FEATURE_LEN, d, h1)
        tables = np.einsum("sd,pdh->psh", emb, per_pos)
        base = params.layers[0].b.astype(np.float32).copy()
        for pos, sym in enumerate(sio):
            base += tables[pos, sym + 1]
        self._base = base
        self._vo_table = np.ascontiguousarray(
            tables[IO_LEN:].reshape(VO_LEN * NUM_SYMBOLS, h1))
        self._offsets = (np.arange(VO_LEN, dtype=np.int64) * NUM_SYMBOLS)[None, :]
        self._rest = [
            (layer.w.astype(np.float32), layer.b.astype(np.float32), layer.act)
            for layer in params.layers[1:]
        ]

    def score(self, svo_rows) -> np.ndarray:
        """Probabilities for a batch of 45-symbol value signatures."""
        idx = np.asarray(svo_rows, dtype=np.int64) + 1
        h = self._vo_table[idx + self._offsets].sum(axis=1) + self._base
        np.maximum(h, 0.0, out=h)
        for w, b, act in self._rest:
            h = h @ w + b
            if act == "relu":
                np.maximum(h, 0.0, out=h)
        p = 1.0 / (1.0 + np.exp(-h[:, 0].astype(np.float64)))
        return np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)


def premise_probabilities(params: ModelParams, sio_symbols) -> np.ndarray:
    """Per-operation probabilities for one task signature."""
    if params.kind != PREMISE:
        raise ValueError("premise probabilities need a premise model")
    return forward_batch(params, [tuple(sio_symbols)])[0]
