"""Reference feed-forward classifiers for tabular data.

Two architectures are supported, both built only from dense layers:

* ``mlp``: ``input -> [dense + ReLU (+ dropout)] * k -> dense -> logits``
* ``tab_resnet``: a dense stem, ``n_blocks`` residual blocks
  ``z + drop_r(W2 drop_h(relu(W1 z)))`` and a ``relu -> dense`` head.

Parameters live in plain numpy arrays (weights stored ``(in, out)`` so a layer
computes ``x @ W + b``). Forward and backward passes are written by hand in
float64, which keeps training bit-reproducible for a fixed seed and lets the
gradient check compare against an independent finite-difference oracle.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from ._stats import classification_f1
from .errors import ConfigurationError, InputError, NumericalError, TrainingError

FORMAT_VERSION = 1
ARCHITECTURES = ("mlp", "tab_resnet")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    ``hidden_dims`` lists hidden widths for ``mlp`` and is ``(n_blocks,
    block_dim)`` for ``tab_resnet``. ``block_hidden_dim`` is the inner width
    of each residual block (defaults to ``2 * block_dim``).
    """

    architecture: str
    input_dim: int
    hidden_dims: tuple[int, ...] = (50,)
    n_classes: int = 2
    activation: str = "relu"
    dropout_rates: tuple[float, ...] = ()
    block_hidden_dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "dropout_rates", tuple(float(r) for r in self.dropout_rates))
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        if self.activation != "relu":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if self.input_dim < 1:
            raise ConfigurationError("input_dim must be >= 1")
        if self.n_classes < 2:
            raise ConfigurationError("n_classes must be >= 2")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"hidden dimensions must be >= 1, got {self.hidden_dims}")
        if any(not 0.0 <= r <= 1.0 for r in self.dropout_rates):
            raise ConfigurationError("dropout rates must lie in [0, 1]")
        if self.architecture == "tab_resnet":
            if len(self.hidden_dims) != 2:
                raise ConfigurationError("tab_resnet hidden_dims must be (n_blocks, block_dim)")
            if self.block_hidden_dim is not None and self.block_hidden_dim < 1:
                raise ConfigurationError("block_hidden_dim must be >= 1")
            if len(self.dropout_rates) not in (0, 2):
                raise ConfigurationError("tab_resnet dropout_rates must be (hidden, residual)")
        elif self.dropout_rates and len(self.dropout_rates) != len(self.hidden_dims):
            raise ConfigurationError("mlp needs one dropout rate per hidden layer")

    @classmethod
    def default(cls, architecture: str, input_dim: int, n_classes: int = 2) -> "ModelSpec":
        if architecture == "mlp":
            return cls("mlp", input_dim, (50,), n_classes)
        if architecture == "tab_resnet":
            return cls("tab_resnet", input_dim, (2, 16), n_classes, dropout_rates=(0.2, 0.05))
        raise ConfigurationError(f"unknown architecture {architecture!r}")

    @property
    def inner_dim(self) -> int:
        return self.block_hidden_dim or 2 * self.hidden_dims[1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        if self.architecture == "mlp":
            dims = [self.input_dim, *self.hidden_dims, self.n_classes]
            return list(zip(dims[:-1], dims[1:]))
        n_blocks, width = self.hidden_dims
        shapes = [(self.input_dim, width)]
        for _ in range(n_blocks):
            shapes += [(width, self.inner_dim), (self.inner_dim, width)]
        shapes.append((width, self.n_classes))
        return shapes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        d["dropout_rates"] = list(self.dropout_rates)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


@dataclass(frozen=True)
class TrainingStats:
    epochs_run: int
    wall_clock_seconds: float
    final_f1: float
    seed: int
    train_rows: int = 0


@dataclass(frozen=True)
class CostProfile:
    parameter_count: int
    flops_per_forward: int
    macs_per_forward: int


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 400
    patience: int = 20
    batch_size: int = 128
    validation_fraction: float = 0.1
    target_f1: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    training_stats: TrainingStats = field(
        default_factory=lambda: TrainingStats(0, 0.0, 0.0, 0)
    )

    def __post_init__(self):
        layers = tuple(
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in self.layers
        )
        shapes = self.spec.layer_shapes()
        if len(layers) != len(shapes):
            raise ConfigurationError(f"expected {len(shapes)} layers, got {len(layers)}")
        for (w, b), shape in zip(layers, shapes):
            if w.shape != shape or b.shape != (shape[1],):
                raise ConfigurationError(f"layer shape {w.shape}/{b.shape} does not match {shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericalError("non-finite parameter value")
            w.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "layers", layers)

    def logits(self, X) -> np.ndarray:
        X = _check_input(self.spec, X)
        return _forward(self.spec, self.layers, X)[0]

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)


@dataclass(frozen=True)
class GradientTarget:
    """Scalar output whose input gradient is requested.

    ``kind`` is one of ``loss`` (cross-entropy against ``labels``), ``logit``,
    ``proba`` (of class ``cls``) or ``margin`` (``logit[cls] - logit[other]``).
    ``cls``/``other``/``labels`` may be ints or per-sample integer arrays.
    """

    kind: str
    labels: np.ndarray | None = None
    cls: int | np.ndarray | None = None
    other: int | np.ndarray | None = None

    @classmethod
    def loss(cls, labels) -> "GradientTarget":
        return cls("loss", labels=np.asarray(labels, dtype=int))

    @classmethod
    def logit(cls, c) -> "GradientTarget":
        return cls("logit", cls=c)

    @classmethod
    def proba(cls, c) -> "GradientTarget":
        return cls("proba", cls=c)

    @classmethod
    def margin(cls, c, other) -> "GradientTarget":
        return cls("margin", cls=c, other=other)


def _check_input(spec: ModelSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise InputError(f"expected {spec.input_dim} feature columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("feature matrix contains non-finite values")
    return X


def _relu(z):
    return np.maximum(z, 0.0)


def _forward(spec: ModelSpec, layers, X, masks=None):
    """Returns ``(logits, cache)``; ``masks`` holds inverted-dropout masks or None."""
    cache: list = []
    if spec.architecture == "mlp":
        a = X
        for i, (w, b) in enumerate(layers[:-1]):
            z = a @ w + b
            h = _relu(z)
            mask = None if masks is None else masks[i]
            if mask is not None:
                h = h * mask
            cache.append((a, z, mask))
            a = h
        w, b = layers[-1]
        cache.append((a, None, None))
        return a @ w + b, cache

    n_blocks = spec.hidden_dims[0]
    ws, bs = layers[0]
    z = X @ ws + bs
    cache.append(X)
    for k in range(n_blocks):
        (w1, b1), (w2, b2) = layers[1 + 2 * k], layers[2 + 2 * k]
        h = z @ w1 + b1
        u = _relu(h)
        mh = mr = None
        if masks is not None:
            mh, mr = masks[2 * k], masks[2 * k + 1]
            if mh is not None:
                u = u * mh
        v = u @ w2 + b2
        if mr is not None:
            v = v * mr
        cache.append((z, h, u, mh, mr))
        z = z + v
    wh, bh = layers[-1]
    r = _relu(z)
    cache.append((z, r))
    return r @ wh + bh, cache


def _backward(spec: ModelSpec, layers, cache, dlogits, param_grads: bool):
    """Backpropagates ``dlogits``; returns ``(dX, grads)`` with grads in layer order."""
    grads: list = [None] * len(layers)
    if spec.architecture == "mlp":
        a = cache[-1][0]
        w, _ = layers[-1]
        if param_grads:
            grads[-1] = (a.T @ dlogits, dlogits.sum(axis=0))
        da = dlogits @ w.T
        for i in range(len(layers) - 2, -1, -1):
            a_prev, z, mask = cache[i]
            if mask is not None:
                da = da * mask
            dz = da * (z > 0)
            if param_grads:
                grads[i] = (a_prev.T @ dz, dz.sum(axis=0))
            da = dz @ layers[i][0].T
        return da, grads

    n_blocks = spec.hidden_dims[0]
    z_last, r = cache[-1]
    wh, _ = layers[-1]
    if param_grads:
        grads[-1] = (r.T @ dlogits, dlogits.sum(axis=0))
    dz = (dlogits @ wh.T) * (z_last > 0)
    for k in range(n_blocks - 1, -1, -1):
        z, h, u, mh, mr = cache[1 + k]
        (w1, _), (w2, _) = layers[1 + 2 * k], layers[2 + 2 * k]
        dv = dz if mr is None else dz * mr
        if param_grads:
            grads[2 + 2 * k] = (u.T @ dv, dv.sum(axis=0))
        du = dv @ w2.T
        if mh is not None:
            du = du * mh
        dh = du * (h > 0)
        if param_grads:
            grads[1 + 2 * k] = (z.T @ dh, dh.sum(axis=0))
        dz = dz + dh @ w1.T
    X = cache[0]
    if param_grads:
        grads[0] = (X.T @ dz, dz.sum(axis=0))
    return dz @ layers[0][0].T, grads


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    return log_z - shifted[np.arange(len(y)), y]


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    p = _softmax(model.logits(X))
    # keep entries strictly inside (0, 1); the shift is far below the 1e-9 row-sum budget
    return np.clip(p, np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0))


def input_gradient(model: TrainedModel, X, target: GradientTarget) -> np.ndarray:
    """Gradient of the per-sample scalar ``target`` with respect to each input row."""
    X = _check_input(model.spec, X)
    n, c = len(X), model.spec.n_classes
    logits, cache = _forward(model.spec, model.layers, X)
    rows = np.arange(n)

    def _index(v):
        v = np.broadcast_to(np.asarray(v, dtype=int), (n,))
        if np.any((v < 0) | (v >= c)):
            raise InputError(f"class index out of range [0, {c})")
        return v

    d = np.zeros_like(logits)
    if target.kind == "loss":
        y = _index(target.labels)
        d = _softmax(logits)
        d[rows, y] -= 1.0
    elif target.kind == "logit":
        d[rows, _index(target.cls)] = 1.0
    elif target.kind == "proba":
        k = _index(target.cls)
        p = _softmax(logits)
        pk = p[rows, k]
        d = -pk[:, None] * p
        d[rows, k] += pk
    elif target.kind == "margin":
        d[rows, _index(target.cls)] += 1.0
        d[rows, _index(target.other)] -= 1.0
    else:
        raise ConfigurationError(f"unknown gradient target {target.kind!r}")
    grad, _ = _backward(model.spec, model.layers, cache, d, param_grads=False)
    bad = ~np.all(np.isfinite(grad), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"non-finite input gradient at sample {i}", sample_index=i)
    return grad


def cost_profile(spec: ModelSpec) -> CostProfile:
    """Per-sample forward cost; FLOPs = 2 * MACs + bias additions."""
    shapes = spec.layer_shapes()
    macs = sum(i * o for i, o in shapes)
    biases = sum(o for _, o in shapes)
    return CostProfile(parameter_count=macs + biases, flops_per_forward=2 * macs + biases,
                       macs_per_forward=macs)


def _init_layer(rng: np.random.Generator, fan_in: int, fan_out: int):
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return w, b


def init_layers(spec: ModelSpec, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Uniform fan-in initialisation, one independent stream per layer."""
    shapes = spec.layer_shapes()
    streams = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x1417]).spawn(len(shapes))
    return [_init_layer(np.random.default_rng(s), i, o) for s, (i, o) in zip(streams, shapes)]


def _dropout_masks(spec: ModelSpec, rng: np.random.Generator, n: int):
    if spec.architecture == "mlp":
        rates = spec.dropout_rates or (0.0,) * len(spec.hidden_dims)
        widths = spec.hidden_dims
        return [_mask(rng, p, (n, w)) for p, w in zip(rates, widths)]
    if not spec.dropout_rates:
        return None
    p_h, p_r = spec.dropout_rates
    width = spec.hidden_dims[1]
    masks = []
    for _ in range(spec.hidden_dims[0]):
        masks += [_mask(rng, p_h, (n, spec.inner_dim)), _mask(rng, p_r, (n, width))]
    return masks


def _mask(rng, p, shape):
    if p <= 0.0:
        return None
    if p >= 1.0:
        return np.zeros(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def _validation_split(n: int, fraction: float, rng: np.random.Generator):
    n_val = int(round(fraction * n))
    if n_val < 1 or n - n_val < 1:
        idx = np.arange(n)
        return idx, idx
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(spec: ModelSpec, X, y, config: TrainConfig | None = None, seed: int = 0) -> TrainedModel:
    """Adam on softmax cross-entropy with early stopping on validation F1.

    The best-scoring parameters (by validation F1) are returned.
    """
    config = config or TrainConfig()
    shape = np.shape(X)
    if len(shape) != 2 or shape[1] != spec.input_dim:
        raise ConfigurationError(f"training data has shape {shape}, spec expects {spec.input_dim} features")
    X = _check_input(spec, X)
    y = np.asarray(y, dtype=int)
    if y.shape != (len(X),):
        raise ConfigurationError(f"label vector shape {y.shape} does not match {len(X)} rows")
    if len(X) == 0:
        raise ConfigurationError("cannot train on an empty split")
    if np.any((y < 0) | (y >= spec.n_classes)):
        raise ConfigurationError(f"labels must lie in [0, {spec.n_classes})")

    classes = np.unique(y)
    if classes.size == 1:
        return _constant_model(spec, int(classes[0]), seed, len(X))

    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x7A1])
    split_rng, batch_rng, drop_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    tr, va = _validation_split(len(X), config.validation_fraction, split_rng)
    Xt, yt, Xv, yv = X[tr], y[tr], X[va], y[va]

    params = [(w.copy(), b.copy()) for w, b in init_layers(spec, seed)]
    m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    step = 0

    def val_f1(ps):
        logits, _ = _forward(spec, ps, Xv)
        return classification_f1(yv, np.argmax(logits, axis=1), spec.n_classes)

    start = time.perf_counter()
    best_f1 = val_f1(params)
    best = [(w.copy(), b.copy()) for w, b in params]
    wait = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = batch_rng.permutation(len(Xt))
        for lo in range(0, len(perm), config.batch_size):
            idx = perm[lo:lo + config.batch_size]
            xb, yb = Xt[idx], yt[idx]
            masks = _dropout_masks(spec, drop_rng, len(idx))
            logits, cache = _forward(spec, params, xb, masks)
            loss = float(_cross_entropy(logits, yb).mean())
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch} (loss={loss})", epoch=epoch)
            d = _softmax(logits)
            d[np.arange(len(yb)), yb] -= 1.0
            d /= len(yb)
            _, grads = _backward(spec, params, cache, d, param_grads=True)
            step += 1
            lr_t = config.learning_rate * np.sqrt(1 - config.beta2 ** step) / (1 - config.beta1 ** step)
            for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
                (mw, mb), (vw, vb) = m[i], v[i]
                for p_, g, m_, v_ in ((w, gw, mw, vw), (b, gb, mb, vb)):
                    m_ *= config.beta1
                    m_ += (1 - config.beta1) * g
                    v_ *= config.beta2
                    v_ += (1 - config.beta2) * g * g
                    p_ -= lr_t * m_ / (np.sqrt(v_) + config.adam_eps)
        if not all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in params):
            raise TrainingError(f"non-finite parameters after epoch {epoch}", epoch=epoch)
        f1 = val_f1(params)
        if f1 > best_f1:
            best_f1 = f1
            best = [(w.copy(), b.copy()) for w, b in params]
            wait = 0
        else:
            wait += 1
        if config.target_f1 is not None and best_f1 >= config.target_f1:
            break
        if wait >= config.patience:
            break
    elapsed = time.perf_counter() - start
    stats = TrainingStats(epochs_run=epoch, wall_clock_seconds=elapsed, final_f1=float(best_f1),
                          seed=int(seed), train_rows=len(Xt))
    return TrainedModel(spec, tuple(best), stats)


def _constant_model(spec: ModelSpec, label: int, seed: int, n_rows: int) -> TrainedModel:
    # single-class data: cross-entropy's infimum is the constant predictor
    layers = init_layers(spec, seed)
    w, _ = layers[-1]
    bias = np.zeros(spec.n_classes)
    bias[label] = 10.0
    layers[-1] = (np.zeros_like(w), bias)
    return TrainedModel(spec, tuple(layers), TrainingStats(0, 0.0, 1.0, int(seed), n_rows))


def randomize_parameters(model: TrainedModel, mode: str = "all_layers", seed: int = 0,
                         steps: int | None = None) -> TrainedModel:
    """Re-draws parameters from the training initialiser.

    ``top_down_cascade`` randomises the last ``steps`` layers (default: all).
    Layer draws depend only on ``(seed, layer index)``, so successive cascade
    steps share the already-randomised top layers.
    """
    n = len(model.layers)
    if mode == "all_layers":
        k = n
    elif mode == "top_down_cascade":
        k = n if steps is None else int(steps)
        if not 0 <= k <= n:
            raise ConfigurationError(f"cascade step must lie in [0, {n}]")
    else:
        raise ConfigurationError(f"unknown randomization mode {mode!r}")
    fresh = init_layers(model.spec, seed)
    layers = list(model.layers[: n - k]) + fresh[n - k:]
    return replace(model, layers=tuple(layers))


def cascade(model: TrainedModel, seed: int = 0) -> Iterator[TrainedModel]:
    """Yields the top-down randomisation steps 1..L."""
    for k in range(1, len(model.layers) + 1):
        yield randomize_parameters(model, "top_down_cascade", seed, steps=k)


def model_to_dict(model: TrainedModel) -> dict:
    """JSON document; arrays are row-major lists of shortest round-trip decimals."""
    return {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "layers": [
            {"shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in model.layers
        ],
        "training_stats": asdict(model.training_stats),
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise InputError(f"unsupported model format_version {doc.get('format_version')!r}")
    spec = ModelSpec.from_dict(doc["spec"])
    layers = tuple(
        (np.asarray(layer["weight"], dtype=np.float64).reshape(layer["shape"]),
         np.asarray(layer["bias"], dtype=np.float64))
        for layer in doc["layers"]
    )
    return TrainedModel(spec, layers, TrainingStats(**doc["training_stats"]))


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))
