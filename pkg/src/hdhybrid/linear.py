"""Penalized logistic regression (lasso, ridge, elastic net) trained by
cyclic proximal coordinate descent with class-balanced weighting.

The per-sweep inner loop runs in the compiled kernel hdhybrid._cd_fast
when it is available and falls back to the NumPy implementation in
hdhybrid._cd_py otherwise; both apply identical updates. The data term is
the weighted mean negative log-likelihood (divided by total sample
weight), so duplicating every row leaves the objective unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _cd_py
from .errors import (
    DimensionMismatchError,
    NonFiniteInputError,
    SingleClassError,
)
from .preprocess import DesignMatrix

try:
    from . import _cd_fast

    HAVE_FAST_KERNEL = True
except ImportError:  # compiled extension not built
    _cd_fast = None
    HAVE_FAST_KERNEL = False


def get_kernel(name: str | None = None):
    """Resolve a sweep kernel: None picks the fastest available."""
    if name is None:
        return _cd_fast if HAVE_FAST_KERNEL else _cd_py
    if name == "cython":
        if not HAVE_FAST_KERNEL:
            raise RuntimeError("compiled kernel requested but hdhybrid._cd_fast is not built")
        return _cd_fast
    if name == "python":
        return _cd_py
    raise ValueError(f"unknown kernel {name!r}")


def kernel_name(kernel=None) -> str:
    k = kernel if kernel is not None else get_kernel()
    return "cython" if getattr(k, "IS_COMPILED", False) else "python"


@dataclass(frozen=True)
class PenaltyConfig:
    kind: str = "l1"  # "l1", "l2", or "elasticnet"
    strength: float = 0.01
    mixing: float = 0.5  # elastic net only
    max_iters: int = 1000
    tol: float = 1e-6
    class_balanced: bool = True

    def __post_init__(self):
        if self.kind not in ("l1", "l2", "elasticnet"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.strength <= 0:
            raise ValueError("penalty strength must be > 0")
        if not 0.0 <= self.mixing <= 1.0:
            raise ValueError("mixing must lie in [0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")

    @property
    def alpha(self) -> float:
        """L1 share of the penalty."""
        if self.kind == "l1":
            return 1.0
        if self.kind == "l2":
            return 0.0
        return self.mixing

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strength": self.strength,
            "mixing": self.mixing,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "class_balanced": self.class_balanced,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PenaltyConfig":
        return cls(**d)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    penalty: PenaltyConfig
    n_iters_run: int
    converged: bool
    objective_trace: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "penalty": self.penalty.to_dict(),
            "n_iters_run": self.n_iters_run,
            "converged": self.converged,
            "objective_trace": list(self.objective_trace),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            penalty=PenaltyConfig.from_dict(d["penalty"]),
            n_iters_run=int(d["n_iters_run"]),
            converged=bool(d["converged"]),
            objective_trace=tuple(d["objective_trace"]),
        )


def sigmoid(z):
    """Numerically stable logistic function, elementwise on arrays."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def class_weights(labels) -> tuple[float, float]:
    """Inverse-frequency weights (w_pos, w_neg) with w_c = n / (2 n_c)."""
    y = np.asarray(labels)
    n = y.size
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("both classes are required to compute class weights")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def sample_weights(labels, class_balanced: bool = True) -> np.ndarray:
    """Per-sample weights; all ones when class balancing is off."""
    y = np.asarray(labels)
    if not class_balanced:
        return np.ones(y.size, dtype=np.float64)
    w_pos, w_neg = class_weights(y)
    return np.where(y == 1, w_pos, w_neg).astype(np.float64)


def weighted_nll(scores, y, u) -> float:
    """Weighted-mean negative log-likelihood from linear scores.

    u must sum to 1. Stable for large |scores|.
    """
    margins = np.where(y == 1, scores, -scores)
    return float(u @ np.logaddexp(0.0, -margins))


def nll_grad(w, b, X, y, u) -> tuple[float, np.ndarray, float]:
    """Value and analytic gradient of the unpenalized weighted NLL.

    Returns (nll, grad_w, grad_b); u must sum to 1.
    """
    scores = X @ w + b
    p = sigmoid(scores)
    r = u * (p - y)
    return weighted_nll(scores, y, u), X.T @ r, float(r.sum())


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def lambda_max(X, y, u=None, class_balanced: bool = True) -> float:
    """Smallest l1 strength at which the solution is entirely zero.

    Equals the largest absolute weighted score at the zero-weight,
    optimal-intercept point: max_j |sum_i u_i x_ij (y_i - ybar_u)| with
    normalized weights u.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if u is None:
        u = sample_weights(y, class_balanced)
    u = np.asarray(u, dtype=np.float64)
    u = u / u.sum()
    ybar = float(u @ y)
    return float(np.max(np.abs(X.T @ (u * (y - ybar)))))


def _objective(scores, y, u, w, lam, alpha) -> float:
    penalty = lam * (alpha * np.abs(w).sum() + 0.5 * (1.0 - alpha) * float(w @ w))
    return weighted_nll(scores, y, u) + penalty


def fit(
    X: DesignMatrix,
    penalty: PenaltyConfig,
    kernel: str | None = None,
    coordinate_order=None,
) -> LinearModel:
    """Fit by cyclic proximal coordinate descent.

    Minimizes the weighted-mean NLL plus
    lam * (alpha ||w||_1 + (1-alpha)/2 ||w||_2^2); the intercept is
    unpenalized and starts at the weighted log-odds of the base rate.
    Each coordinate step minimizes a quadratic upper bound with constant
    0.25 * sum_i u_i x_ij^2, so the objective never increases. Stops when
    the largest coordinate change in a sweep drops below penalty.tol.
    """
    values = np.asarray(X.values, dtype=np.float64)
    y = np.asarray(X.labels, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != y.shape[0]:
        raise DimensionMismatchError("X and labels disagree on sample count")
    if not np.isfinite(values).all() or not np.isfinite(y).all():
        raise NonFiniteInputError("fit requires finite inputs")
    if not (0 < int((y == 1).sum()) < y.size):
        raise SingleClassError("fit requires both classes")

    n, p = values.shape
    u = sample_weights(y, penalty.class_balanced)
    u = u / u.sum()
    lam = penalty.strength
    alpha = penalty.alpha
    lam_l1 = lam * alpha
    lam_l2 = lam * (1.0 - alpha)

    XF = np.asfortranarray(values)
    curvature = 0.25 * ((values * values).T @ u)
    ybar = float(u @ y)
    b = math.log(ybar / (1.0 - ybar))
    w = np.zeros(p, dtype=np.float64)
    if coordinate_order is None:
        order = np.arange(p, dtype=np.int64)
    else:
        order = np.asarray(coordinate_order, dtype=np.int64)

    sweep = get_kernel(kernel).cd_sweep
    scores = np.full(n, b, dtype=np.float64)
    trace = [_objective(scores, y, u, w, lam, alpha)]
    n_iters = 0
    converged = False
    for _ in range(penalty.max_iters):
        scores = values @ w + b
        b, max_delta = sweep(
            XF, y, u, scores, w, curvature, lam_l1, lam_l2, b, order
        )
        n_iters += 1
        trace.append(_objective(scores, y, u, w, lam, alpha))
        if max_delta < penalty.tol:
            converged = True
            break

    return LinearModel(
        weights=w,
        intercept=b,
        penalty=penalty,
        n_iters_run=n_iters,
        converged=converged,
        objective_trace=tuple(trace),
    )


def predict_proba(model: LinearModel, X) -> np.ndarray:
    """Rowwise sigmoid(X w + b)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatchError(
            f"matrix has {X.shape[-1]} columns, model expects {model.weights.shape[0]}"
        )
    return sigmoid(X @ model.weights + model.intercept)
