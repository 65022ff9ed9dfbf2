"""Feature selection: top-k ranking by absolute lasso coefficients,
elastic net coefficients, or mutual information, plus the earlier
non-zero-lasso selection with a top-k ridge fallback.

All scorers are stateless functions of a standardized design matrix and
can run per fold in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linear
from .errors import KTooLargeError
from .linear import PenaltyConfig
from .preprocess import DesignMatrix

REFINED_METHODS = ("l1", "elasticnet", "mutual_info")
PROTOTYPE_METHOD = "prototype_l1_nonzero"


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "l1"
    k: int = 100
    mi_bins: int = 10
    fallback_k: int = 100
    inner_penalty: PenaltyConfig = field(default_factory=PenaltyConfig)

    def __post_init__(self):
        if self.method not in REFINED_METHODS + (PROTOTYPE_METHOD,):
            raise ValueError(f"unknown selection method {self.method!r}")
        if self.k < 1 or self.fallback_k < 1:
            raise ValueError("k and fallback_k must be positive")
        if self.mi_bins < 2:
            raise ValueError("mi_bins must be at least 2")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "mi_bins": self.mi_bins,
            "fallback_k": self.fallback_k,
            "inner_penalty": self.inner_penalty.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionConfig":
        d = dict(d)
        d["inner_penalty"] = PenaltyConfig.from_dict(d["inner_penalty"])
        return cls(**d)


@dataclass(frozen=True)
class SelectionResult:
    method: str
    selected_indices: tuple[int, ...]  # ranked: descending score, ties by index
    selected_names: tuple[str, ...]
    scores: np.ndarray  # over all candidate features
    fold_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "selected_indices": list(self.selected_indices),
            "selected_names": list(self.selected_names),
            "scores": self.scores.tolist(),
            "fold_id": self.fold_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(
            method=d["method"],
            selected_indices=tuple(d["selected_indices"]),
            selected_names=tuple(d["selected_names"]),
            scores=np.asarray(d["scores"], dtype=np.float64),
            fold_id=d["fold_id"],
        )


def score_l1(X: DesignMatrix, penalty: PenaltyConfig | None = None) -> np.ndarray:
    """Absolute lasso coefficients as feature scores."""
    pen = replace(penalty or PenaltyConfig(), kind="l1")
    model = linear.fit(X, pen)
    return np.abs(model.weights)


def score_elasticnet(X: DesignMatrix, penalty: PenaltyConfig | None = None) -> np.ndarray:
    """Absolute elastic-net coefficients as feature scores."""
    pen = replace(penalty or PenaltyConfig(), kind="elasticnet")
    model = linear.fit(X, pen)
    return np.abs(model.weights)


def _equal_frequency_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Discretize one feature into at most `bins` codes.

    Features with fewer than `bins` distinct values use the distinct
    values themselves as categories; otherwise cut points are the
    deduplicated k/bins quantiles.
    """
    distinct = np.unique(x)
    if distinct.size < bins:
        return np.searchsorted(distinct, x)
    qs = np.quantile(x, np.arange(1, bins) / bins)
    edges = np.unique(qs)
    return np.searchsorted(edges, x, side="right")


def score_mutual_info(X: DesignMatrix, bins: int = 10) -> np.ndarray:
    """Plug-in mutual information (nats) of each discretized feature
    with the binary label. Nonnegative; exactly 0 for constant features.
    """
    values = np.asarray(X.values, dtype=np.float64)
    y = np.asarray(X.labels, dtype=np.int64)
    n = values.shape[0]
    p_y = np.array([np.mean(y == 0), np.mean(y == 1)])
    scores = np.zeros(values.shape[1])
    for j in range(values.shape[1]):
        codes = _equal_frequency_bins(values[:, j], bins)
        n_codes = int(codes.max()) + 1
        if n_codes < 2:
            continue
        joint = np.zeros((n_codes, 2))
        np.add.at(joint, (codes, y), 1.0)
        joint /= n
        p_x = joint.sum(axis=1)
        mi = 0.0
        for a in range(n_codes):
            for b in (0, 1):
                pab = joint[a, b]
                if pab > 0.0:
                    mi += pab * np.log(pab / (p_x[a] * p_y[b]))
        scores[j] = max(mi, 0.0)
    return scores


def rank_descending(scores: np.ndarray) -> np.ndarray:
    """Indices ordered by descending score, ties broken by ascending index."""
    return np.argsort(-np.asarray(scores), kind="stable")


def select_top_k(scores, names, k: int, method: str = "", fold_id=None) -> SelectionResult:
    """Exactly k highest-scoring features; deterministic tie-break."""
    scores = np.asarray(scores, dtype=np.float64)
    if k > scores.size:
        raise KTooLargeError(f"k={k} exceeds feature count {scores.size}")
    ranked = rank_descending(scores)[:k]
    return SelectionResult(
        method=method,
        selected_indices=tuple(int(i) for i in ranked),
        selected_names=tuple(names[i] for i in ranked),
        scores=scores,
        fold_id=fold_id,
    )


def select_refined(X: DesignMatrix, config: SelectionConfig, fold_id=None) -> SelectionResult:
    """Top-k selection under the configured refined scoring method."""
    if config.method == "l1":
        scores = score_l1(X, config.inner_penalty)
    elif config.method == "elasticnet":
        scores = score_elasticnet(X, config.inner_penalty)
    elif config.method == "mutual_info":
        scores = score_mutual_info(X, config.mi_bins)
    else:
        raise ValueError(f"{config.method!r} is not a refined method")
    return select_top_k(scores, X.feature_names, config.k, config.method, fold_id)


def select_prototype(X: DesignMatrix, config: SelectionConfig, fold_id=None) -> SelectionResult:
    """All features with non-zero lasso weight; if that set is empty,
    fall back to the fallback_k largest absolute ridge weights."""
    pen = replace(config.inner_penalty, kind="l1")
    scores = np.abs(linear.fit(X, pen).weights)
    nonzero = int(np.count_nonzero(scores))
    if nonzero == 0:
        pen = replace(config.inner_penalty, kind="l2")
        scores = np.abs(linear.fit(X, pen).weights)
        return select_top_k(
            scores, X.feature_names, min(config.fallback_k, scores.size),
            PROTOTYPE_METHOD, fold_id,
        )
    ranked = rank_descending(scores)[:nonzero]
    return SelectionResult(
        method=PROTOTYPE_METHOD,
        selected_indices=tuple(int(i) for i in ranked),
        selected_names=tuple(X.feature_names[i] for i in ranked),
        scores=scores,
        fold_id=fold_id,
    )
