"""Feedforward binary classifier: ReLU hidden layers, sigmoid output,
weighted binary cross-entropy with L2 weight decay, Adam updates, and
early stopping on a stratified validation split.

Everything is plain NumPy and deterministic for a fixed seed. The decay
term enters the objective explicitly (biases excluded), so analytic
gradients check against finite differences of the same objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonFiniteLossError,
    SingleClassError,
)
from .linear import class_weights, sigmoid
from .preprocess import DesignMatrix

_PROB_FLOOR = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (64, 32)
    weight_decay: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.1  # 0 disables the split and early stopping
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if len(self.hidden_sizes) < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be positive integers, at least one layer")
        if self.weight_decay < 0 or self.learning_rate <= 0:
            raise ValueError("weight_decay must be >= 0 and learning_rate > 0")
        if not (self.val_fraction == 0.0 or 0.0 < self.val_fraction <= 0.5):
            raise ValueError("val_fraction must be 0 (disabled) or in (0, 0.5]")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, patience must be positive")

    def to_dict(self) -> dict:
        return {
            "hidden_sizes": list(self.hidden_sizes),
            "weight_decay": self.weight_decay,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        d = dict(d)
        d["hidden_sizes"] = tuple(d["hidden_sizes"])
        return cls(**d)


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]  # (weight, bias) pairs
    config: MlpConfig
    best_epoch: int
    train_trace: tuple[tuple[int, float, float], ...]  # (epoch, train, val)

    @property
    def input_width(self) -> int:
        return self.layers[0][0].shape[0]

    def to_dict(self) -> dict:
        return {
            "layers": [{"w": W.tolist(), "b": b.tolist()} for W, b in self.layers],
            "config": self.config.to_dict(),
            "best_epoch": self.best_epoch,
            "train_trace": [list(t) for t in self.train_trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        layers = tuple(
            (np.asarray(l["w"], dtype=np.float64), np.asarray(l["b"], dtype=np.float64))
            for l in d["layers"]
        )
        return cls(
            layers=layers,
            config=MlpConfig.from_dict(d["config"]),
            best_epoch=int(d["best_epoch"]),
            train_trace=tuple(
                (int(e), float(tl), float(vl)) for e, tl, vl in d["train_trace"]
            ),
        )


def _init_layers(sizes, rng) -> list:
    """He-uniform weights, zero biases."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((W, np.zeros(fan_out)))
    return layers


def _forward_full(layers, X):
    """Returns (pre-activations, activations, probabilities)."""
    zs, acts = [], [X]
    a = X
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        zs.append(z)
        if i < len(layers) - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
    probs = sigmoid(zs[-1][:, 0])
    return zs, acts, probs


def forward(model: MlpModel, X) -> np.ndarray:
    """Probability of the positive class, rowwise."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_width:
        raise DimensionMismatchError(
            f"input has {X.shape[1]} features, model expects {model.input_width}"
        )
    _, _, probs = _forward_full(model.layers, X)
    return probs


def weighted_bce(probs, y, weights) -> float:
    """Mean over samples of weight_i * bce_i, probabilities clamped."""
    p = np.clip(probs, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    bce = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(np.mean(weights * bce))


def _objective_and_grads(layers, X, y, weights, weight_decay):
    """Weighted BCE plus decay, with exact parameter gradients.

    The probability clamp only guards the reported loss value; gradients
    use the exact sigmoid/BCE identity delta = w * (p - y) / n.
    """
    n = X.shape[0]
    zs, acts, probs = _forward_full(layers, X)
    loss = weighted_bce(probs, y, weights)
    decay = 0.0
    for W, _ in layers:
        decay += float(np.sum(W * W))
    loss += 0.5 * weight_decay * decay

    delta = (weights * (probs - y) / n)[:, None]
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        gW = acts[i].T @ delta + weight_decay * W
        gb = delta.sum(axis=0)
        grads[i] = (gW, gb)
        if i > 0:
            delta = (delta @ W.T) * (zs[i - 1] > 0.0)
    return loss, grads


def _stratified_val_split(y, val_fraction, rng):
    """Per-class shuffled split; at least one sample of each class lands
    in validation, and each class must keep at least one training row."""
    train_idx, val_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < 2:
            raise SingleClassError(
                f"class {cls} has {idx.size} sample(s); cannot split validation"
            )
        idx = rng.permutation(idx)
        n_val = max(1, int(np.floor(val_fraction * idx.size)))
        if idx.size - n_val < 1:
            raise SingleClassError("validation split would empty a training class")
        val_idx.append(idx[:n_val])
        train_idx.append(idx[n_val:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(val_idx))


def train(X: DesignMatrix, config: MlpConfig) -> MlpModel:
    """Mini-batch Adam on weighted BCE + L2 decay with early stopping.

    A stratified val_fraction split is held out for the stopping metric
    (plain weighted BCE, no decay); training halts after `patience`
    epochs without improvement and the best-epoch parameters are
    restored. With val_fraction 0 the model trains on every row for
    max_epochs and the stopping metric is the full-training-set BCE; the
    best recorded epoch is still the one restored.
    """
    values = np.asarray(X.values, dtype=np.float64)
    y = np.asarray(X.labels, dtype=np.float64)
    if not (0 < int((y == 1).sum()) < y.size):
        raise SingleClassError("train requires both classes")

    rng = np.random.default_rng(config.seed)
    sizes = (values.shape[1],) + config.hidden_sizes + (1,)
    layers = _init_layers(sizes, rng)

    if config.val_fraction > 0.0:
        tr_idx, va_idx = _stratified_val_split(y, config.val_fraction, rng)
    else:
        tr_idx = np.arange(values.shape[0])
        va_idx = None
    X_tr, y_tr = values[tr_idx], y[tr_idx]

    w_pos, w_neg = class_weights(y_tr)
    cw_tr = np.where(y_tr == 1, w_pos, w_neg)
    if va_idx is not None:
        X_va, y_va = values[va_idx], y[va_idx]
        cw_va = np.where(y_va == 1, w_pos, w_neg)

    m_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
    v_state = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
    t = 0
    lr = config.learning_rate

    best_val = np.inf
    best_epoch = 0
    best_layers = [(W.copy(), b.copy()) for W, b in layers]
    stale = 0
    trace = []

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(len(tr_idx))
        batch_losses = []
        for start in range(0, len(perm), config.batch_size):
            batch = perm[start : start + config.batch_size]
            loss, grads = _objective_and_grads(
                layers, X_tr[batch], y_tr[batch], cw_tr[batch], config.weight_decay
            )
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"training diverged at epoch {epoch}")
            batch_losses.append(loss)
            t += 1
            bc1 = 1.0 - ADAM_BETA1**t
            bc2 = 1.0 - ADAM_BETA2**t
            for i, ((W, b), (gW, gb)) in enumerate(zip(layers, grads)):
                mW, mb = m_state[i]
                vW, vb = v_state[i]
                mW = ADAM_BETA1 * mW + (1 - ADAM_BETA1) * gW
                mb = ADAM_BETA1 * mb + (1 - ADAM_BETA1) * gb
                vW = ADAM_BETA2 * vW + (1 - ADAM_BETA2) * gW * gW
                vb = ADAM_BETA2 * vb + (1 - ADAM_BETA2) * gb * gb
                m_state[i] = (mW, mb)
                v_state[i] = (vW, vb)
                W = W - lr * (mW / bc1) / (np.sqrt(vW / bc2) + ADAM_EPS)
                b = b - lr * (mb / bc1) / (np.sqrt(vb / bc2) + ADAM_EPS)
                layers[i] = (W, b)

        train_loss = float(np.mean(batch_losses))
        if va_idx is not None:
            _, _, p_va = _forward_full(layers, X_va)
            val_loss = weighted_bce(p_va, y_va, cw_va)
        else:
            # no held-out rows: track the full training objective instead
            _, _, p_tr = _forward_full(layers, X_tr)
            val_loss = weighted_bce(p_tr, y_tr, cw_tr) + 0.5 * config.weight_decay * sum(
                float(np.sum(W * W)) for W, _ in layers
            )
        if not np.isfinite(val_loss):
            raise NonFiniteLossError(f"validation loss diverged at epoch {epoch}")
        trace.append((epoch, train_loss, val_loss))

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_layers = [(W.copy(), b.copy()) for W, b in layers]
            stale = 0
        else:
            stale += 1
            if va_idx is not None and stale >= config.patience:
                break

    return MlpModel(
        layers=tuple((W, b) for W, b in best_layers),
        config=config,
        best_epoch=best_epoch,
        train_trace=tuple(trace),
    )


def gradient_check(config: MlpConfig | None = None, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference
    gradients on a small random network (widths capped at 8, n <= 16).
    """
    if config is None:
        config = MlpConfig(hidden_sizes=(6, 4), weight_decay=0.1, seed=seed)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 17))
    in_dim = int(rng.integers(2, 9))
    hidden = tuple(min(h, 8) for h in config.hidden_sizes)
    sizes = (in_dim,) + hidden + (1,)
    layers = _init_layers(sizes, rng)

    X = rng.standard_normal((n, in_dim))
    y = np.zeros(n)
    y[rng.permutation(n)[: n // 2 + 1]] = 1.0
    weights = np.where(y == 1, 1.3, 0.7)

    loss, grads = _objective_and_grads(layers, X, y, weights, config.weight_decay)
    h = 1e-5
    max_rel = 0.0
    for li in range(len(layers)):
        for pi in range(2):  # weight then bias
            arr = layers[li][pi]
            grad = grads[li][pi]
            flat = arr.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up, _ = _objective_and_grads(layers, X, y, weights, config.weight_decay)
                flat[k] = orig - h
                dn, _ = _objective_and_grads(layers, X, y, weights, config.weight_decay)
                flat[k] = orig
                fd = (up - dn) / (2.0 * h)
                a = grad.ravel()[k]
                rel = abs(a - fd) / (abs(a) + abs(fd) + 1e-8)
                if rel > max_rel:
                    max_rel = rel
    return max_rel
