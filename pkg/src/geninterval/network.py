"""Feed-forward ReLU classifiers trained with softmax cross-entropy and plain SGD."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

# hidden widths per preset
ARCHITECTURES = {
    "3x128": (128, 128, 128),
    "1x512": (512,),
    "2x256": (256, 256),
    "4x128": (128, 128, 128, 128),
}
ARCHITECTURES["main"] = ARCHITECTURES["3x128"]


def layer_sizes_for(arch, dim, num_classes):
    try:
        hidden = ARCHITECTURES[arch]
    except KeyError:
        raise ValueError(f"unknown architecture preset {arch!r}; known: {sorted(ARCHITECTURES)}") from None
    return [dim, *hidden, num_classes]


@dataclass
class MLPParams:
    layer_sizes: list
    weights: list  # (out, in) per layer
    biases: list
    use_bias: bool = True

    def __post_init__(self):
        sizes = list(self.layer_sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l}: shapes {w.shape}, {b.shape} break the size chain {sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: non-finite parameters")
            if not self.use_bias and np.any(b != 0):
                raise ValueError("bias-free network with nonzero bias")
        self.layer_sizes = sizes

    @property
    def num_layers(self):
        return len(self.weights)

    @property
    def num_classes(self):
        return self.layer_sizes[-1]

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    def num_parameters(self):
        n = sum(w.size for w in self.weights)
        if self.use_bias:
            n += sum(b.size for b in self.biases)
        return n

    def copy(self):
        return replace(self, weights=[w.copy() for w in self.weights],
                       biases=[b.copy() for b in self.biases])


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 5000
    batch_size: int = 32
    seed: int = 0
    init_scale: object = "auto"
    target_train_acc: float = 0.999
    checkpoint_every: int = 5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    val_acc: float
    train_loss: float
    mean_gi: Optional[float] = None


def init_mlp(layer_sizes, seed=0, init_scale="auto", use_bias=True):
    """Uniform weights on [-s, s]; s = 1/sqrt(fan_in) for "auto". Biases start at zero."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 3 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    if init_scale != "auto" and not float(init_scale) > 0:
        raise ValueError("init_scale must be positive or 'auto'")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = 1.0 / np.sqrt(fan_in) if init_scale == "auto" else float(init_scale)
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(sizes, weights, biases, use_bias)


def _check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input dimension {x.shape[-1]} != {params.input_dim}")
    return x


def forward(params, x):
    """Logits, activation pattern and penultimate activation for one input or a batch.

    The pattern is a list of boolean masks (pre-activation > 0), one per hidden layer.
    """
    a = _check_input(params, x)
    pattern = []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = a @ w.T + b
        mask = z > 0
        pattern.append(mask)
        a = np.where(mask, z, 0.0)
    logits = a @ params.weights[-1].T + params.biases[-1]
    return logits, pattern, a


def logits(params, x):
    return forward(params, x)[0]


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def predict(params, x):
    # argmax returns the lowest index on ties
    return np.argmax(logits(params, x), axis=-1)


def _check_labels(params, labels, n):
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ValueError("one label per input required")
    if n and (y.min() < 0 or y.max() >= params.num_classes):
        raise ValueError("label out of range")
    return y.astype(np.int64)


def loss_and_grad(params, inputs, labels):
    """Mean cross-entropy over the batch and its exact gradients.

    Returns ``(loss, (weight_grads, bias_grads))``. The output-layer weight
    gradient is (softmax - onehot) outer (last hidden activation), averaged.
    """
    x = np.atleast_2d(_check_input(params, inputs))
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    y = _check_labels(params, labels, n)

    acts = [x]
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
        acts.append(a)
    z = a @ params.weights[-1].T + params.biases[-1]

    logp = log_softmax(z)
    loss = -float(np.mean(logp[np.arange(n), y]))

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    gw = [None] * params.num_layers
    gb = [None] * params.num_layers
    for l in range(params.num_layers - 1, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0) if params.use_bias else np.zeros_like(params.biases[l])
        if l:
            delta = (delta @ params.weights[l]) * (acts[l] > 0)
    return loss, (gw, gb)


def sgd_step(params, grads, learning_rate):
    """W <- W - lr * dW for every layer; returns new parameters."""
    gw, gb = grads
    if len(gw) != params.num_layers or len(gb) != params.num_layers:
        raise ValueError("gradient layer count mismatch")
    weights, biases = [], []
    for w, b, dw, db in zip(params.weights, params.biases, gw, gb):
        if dw.shape != w.shape or db.shape != b.shape:
            raise ValueError("gradient shape mismatch")
        weights.append(w - learning_rate * dw)
        biases.append(b - learning_rate * db if params.use_bias else b.copy())
    return replace(params, weights=weights, biases=biases)


def accuracy(params, ds):
    if len(ds) == 0:
        raise ValueError("accuracy of an empty dataset")
    if ds.dim != params.input_dim:
        raise ValueError(f"dataset dimension {ds.dim} != network input {params.input_dim}")
    return float(np.mean(predict(params, ds.inputs) == ds.labels))


def mean_loss(params, ds):
    return loss_and_grad(params, ds.inputs, ds.labels)[0]


def train(params, train_ds, val_ds, cfg, on_checkpoint: Callable | None = None):
    """Minibatch SGD with per-epoch shuffling and early stop at ``target_train_acc``.

    An EpochRecord is emitted every ``checkpoint_every`` epochs and at the
    stopping epoch. ``on_checkpoint(params, record)`` may fill extra fields.
    """
    if train_ds.dim != params.input_dim or (val_ds is not None and val_ds.dim != train_ds.dim):
        raise ValueError("dataset dimensions do not match the network")
    if train_ds.num_classes != params.num_classes or (
            val_ds is not None and val_ds.num_classes != train_ds.num_classes):
        raise ValueError("datasets disagree on the number of classes")

    rng = np.random.default_rng(cfg.seed)
    p = params.copy()
    records = []
    n = len(train_ds)
    x, y = train_ds.inputs, train_ds.labels
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(p, x[idx], y[idx])
            p = sgd_step(p, grads, cfg.learning_rate)
        train_acc = accuracy(p, train_ds)
        done = train_acc >= cfg.target_train_acc or epoch == cfg.epochs
        if done or (cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0):
            rec = EpochRecord(
                epoch=epoch,
                train_acc=train_acc,
                val_acc=accuracy(p, val_ds) if val_ds is not None else float("nan"),
                train_loss=mean_loss(p, train_ds),
            )
            if on_checkpoint is not None:
                on_checkpoint(p, rec)
            records.append(rec)
            log.debug("epoch %d train %.4f val %.4f", epoch, rec.train_acc, rec.val_acc)
        if train_acc >= cfg.target_train_acc:
            break
    return p, records


def save_checkpoint(params, path, seed=None):
    """Write parameters to an ``.npz`` archive (bit-exact round trip)."""
    arrays = {"version": np.array(CHECKPOINT_VERSION),
              "layer_sizes": np.array(params.layer_sizes, dtype=np.int64),
              "use_bias": np.array(params.use_bias),
              "seed": np.array(-1 if seed is None else seed, dtype=np.int64)}
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{l}"] = w
        arrays[f"b{l}"] = b
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    """Returns ``(params, seed)``; seed is None when it was not recorded."""
    with np.load(path) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = [int(s) for s in z["layer_sizes"]]
        n = len(sizes) - 1
        params = MLPParams(sizes, [z[f"W{l}"].copy() for l in range(n)],
                           [z[f"b{l}"].copy() for l in range(n)], bool(z["use_bias"]))
        seed = int(z["seed"])
    return params, (None if seed < 0 else seed)
