"""Metrics, ROC construction, the stratified cross-validation harness
running the four-model comparison, and permutation importance.

AUC is computed by grouping tied scores and trapezoidal integration over
integer confusion counts, which makes it exactly the Mann-Whitney
statistic with ties counted one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linear, mlp, select
from .errors import ClassTooSmallError, LengthMismatchError, SingleClassError
from .ingest import LabelRule, Table, derive_label
from .preprocess import DesignMatrix, PreprocessPlan, apply_plan, fit_plan
from .select import PROTOTYPE_METHOD, SelectionResult

MODEL_L1 = "l1_logistic"
MODEL_L2 = "l2_logistic"
MODEL_MLP = "mlp_full"
MODEL_HYBRID = "hybrid_topk"
MODEL_HYBRID_PROTO = "hybrid_prototype"


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn)
    threshold: float = 0.5

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "confusion": {
                "tp": self.confusion[0],
                "fp": self.confusion[1],
                "tn": self.confusion[2],
                "fn": self.confusion[3],
            },
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        c = d["confusion"]
        return cls(
            accuracy=d["accuracy"],
            precision=d["precision"],
            recall=d["recall"],
            f1=d["f1"],
            auc=d["auc"],
            confusion=(c["tp"], c["fp"], c["tn"], c["fn"]),
            threshold=d["threshold"],
        )


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float, float], ...]  # (fpr, tpr, threshold)

    def to_dict(self) -> dict:
        return {"points": [list(p) for p in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "RocCurve":
        return cls(points=tuple((p[0], p[1], p[2]) for p in d["points"]))


@dataclass(frozen=True)
class FoldReport:
    fold_id: int
    metrics: dict
    roc: dict
    selection: SelectionResult | None
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    # fitted artifacts ride along for persistence; not serialized
    models: dict = field(default_factory=dict, repr=False, compare=False)
    plan: PreprocessPlan | None = field(default=None, repr=False, compare=False)
    test_probs: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "fold_id": self.fold_id,
            "metrics": {k: m.to_dict() for k, m in self.metrics.items()},
            "roc": {k: r.to_dict() for k, r in self.roc.items()},
            "selection": self.selection.to_dict() if self.selection else None,
            "train_indices": list(self.train_indices),
            "test_indices": list(self.test_indices),
        }


@dataclass(frozen=True)
class RunReport:
    folds: tuple[FoldReport, ...]
    mean_metrics: dict
    pooled_roc: dict
    selection_stability: tuple[dict, ...]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "folds": [f.to_dict() for f in self.folds],
            "mean_metrics": {k: m.to_dict() for k, m in self.mean_metrics.items()},
            "pooled_roc": {k: r.to_dict() for k, r in self.pooled_roc.items()},
            "selection_stability": list(self.selection_stability),
            "metadata": self.metadata,
        }


def confusion_metrics(labels, probs, threshold: float = 0.5) -> Metrics:
    """Threshold the probabilities and derive the usual scalar metrics.

    Predictions are positive when prob >= threshold. Precision, recall,
    and F1 fall back to 0 when their denominators are empty. AUC is
    filled in when both classes are present, None otherwise.
    """
    y = np.asarray(labels).astype(np.int64)
    p = np.asarray(probs, dtype=np.float64)
    if y.shape[0] != p.shape[0]:
        raise LengthMismatchError(f"{y.shape[0]} labels vs {p.shape[0]} probabilities")
    pred = p >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    n = tp + fp + tn + fn
    accuracy = (tp + tn) / n if n else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    auc = None
    if 0 < int(np.sum(y == 1)) < y.size:
        _, auc = roc_auc(y, p)
    return Metrics(accuracy, precision, recall, f1, auc, (tp, fp, tn, fn), threshold)


def roc_auc(labels, scores) -> tuple[RocCurve, float]:
    """ROC sweep over distinct score values with tie grouping.

    Returns the curve from (0,0) to (1,1) and the trapezoidal AUC, which
    equals the pairwise Mann-Whitney statistic with ties counted half.
    """
    y = np.asarray(labels).astype(np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape[0] != s.shape[0]:
        raise LengthMismatchError(f"{y.shape[0]} labels vs {s.shape[0]} scores")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC requires both classes")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    group_end = np.r_[np.diff(s_sorted) != 0.0, True]
    cum_tp = np.cumsum(y_sorted)[group_end]
    cum_fp = np.cumsum(1 - y_sorted)[group_end]
    thresholds = s_sorted[group_end]

    points = [(0.0, 0.0, math.inf)]
    num = 0.0  # twice the unnormalized area; integer-valued in float64
    fp_prev = 0
    tp_prev = 0
    for fp, tp, thr in zip(cum_fp.tolist(), cum_tp.tolist(), thresholds.tolist()):
        num += (fp - fp_prev) * (tp + tp_prev)
        points.append((fp / n_neg, tp / n_pos, thr))
        fp_prev, tp_prev = fp, tp
    auc = num / (2.0 * n_pos * n_neg)
    return RocCurve(tuple(points)), auc


def stratified_folds(labels, n_folds: int, seed: int) -> list:
    """Per-class shuffle then round-robin assignment to test folds.

    Fold class counts differ by at most one and the test folds partition
    every index. Deterministic for a fixed seed.
    """
    y = np.asarray(labels).astype(np.int64)
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < n_folds:
            raise ClassTooSmallError(
                f"class {cls} has {idx.size} samples, fewer than {n_folds} folds"
            )
        idx = rng.permutation(idx)
        for i, row in enumerate(idx):
            assignment[row] = i % n_folds
    folds = []
    for f in range(n_folds):
        test = np.flatnonzero(assignment == f)
        train = np.flatnonzero(assignment != f)
        folds.append((train, test))
    return folds


def permutation_importance(
    predict, X, labels, feature_names=None, repeats: int = 5, seed: int = 0
) -> list:
    """AUC degradation when one feature column is shuffled.

    predict maps a matrix to positive-class probabilities. Returns
    (name, importance_mean, importance_std) tuples sorted by descending
    mean importance, ties broken by feature order; std is over repeats
    (population convention).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels)
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(X.shape[1])]
    rng = np.random.default_rng(seed)
    _, base = roc_auc(y, predict(X))
    work = X.copy()
    rows = []
    for j in range(X.shape[1]):
        drops = []
        for _ in range(repeats):
            perm = rng.permutation(X.shape[0])
            work[:, j] = X[perm, j]
            _, shuffled = roc_auc(y, predict(work))
            drops.append(base - shuffled)
        work[:, j] = X[:, j]
        rows.append((feature_names[j], float(np.mean(drops)), float(np.std(drops))))
    order = sorted(range(len(rows)), key=lambda i: (-rows[i][1], i))
    return [rows[i] for i in order]


def _predictor(model):
    """Uniform predict-probabilities callable for either model family."""
    if isinstance(model, linear.LinearModel):
        return lambda X: linear.predict_proba(model, X)
    return lambda X: mlp.forward(model, X)


def _seeded(cfg: mlp.MlpConfig, seed: int) -> mlp.MlpConfig:
    return replace(cfg, seed=seed)


def run_fold(
    feature_table: Table,
    labels: np.ndarray,
    fold_id: int,
    train_idx,
    test_idx,
    cfg,
) -> FoldReport:
    """Fit the plan, all four models, and the fold selection on training
    rows only, then score everything on the held-out rows."""
    train_idx = np.asarray(train_idx, dtype=np.intp)
    test_idx = np.asarray(test_idx, dtype=np.intp)
    y_tr = labels[train_idx]
    y_te = labels[test_idx]
    plan = fit_plan(feature_table.take(train_idx), cfg.preprocess_threshold)
    dm_tr = apply_plan(plan, feature_table.take(train_idx), y_tr)
    dm_te = apply_plan(plan, feature_table.take(test_idx), y_te)

    prototype = cfg.selection.method == PROTOTYPE_METHOD
    if prototype:
        sel = select.select_prototype(dm_tr, cfg.selection, fold_id)
    else:
        sel = select.select_refined(dm_tr, cfg.selection, fold_id)
    idx = list(sel.selected_indices)
    dm_tr_sel = dm_tr.restrict(idx)
    dm_te_sel = dm_te.restrict(idx)

    hybrid_name = MODEL_HYBRID_PROTO if prototype else MODEL_HYBRID
    models = {
        MODEL_L1: linear.fit(dm_tr, cfg.linear_l1),
        MODEL_L2: linear.fit(dm_tr, cfg.linear_l2),
        MODEL_MLP: mlp.train(dm_tr, _seeded(cfg.mlp_full, cfg.seed + 1000 + fold_id)),
        hybrid_name: mlp.train(
            dm_tr_sel, _seeded(cfg.mlp_hybrid, cfg.seed + 2000 + fold_id)
        ),
    }

    metrics = {}
    rocs = {}
    probs = {}
    for name, model in models.items():
        X_te = dm_te_sel.values if name == hybrid_name else dm_te.values
        p = _predictor(model)(X_te)
        metrics[name] = confusion_metrics(y_te, p, cfg.threshold)
        rocs[name], _ = roc_auc(y_te, p)
        probs[name] = p
    return FoldReport(
        fold_id=fold_id,
        metrics=metrics,
        roc=rocs,
        selection=sel,
        train_indices=tuple(int(i) for i in train_idx),
        test_indices=tuple(int(i) for i in test_idx),
        models=models,
        plan=plan,
        test_probs=probs,
    )


def _mean_metrics(fold_metrics: list) -> Metrics:
    """Arithmetic mean of scalar metrics; confusion counts are summed."""
    tp = sum(m.confusion[0] for m in fold_metrics)
    fp = sum(m.confusion[1] for m in fold_metrics)
    tn = sum(m.confusion[2] for m in fold_metrics)
    fn = sum(m.confusion[3] for m in fold_metrics)
    aucs = [m.auc for m in fold_metrics if m.auc is not None]
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in fold_metrics])),
        precision=float(np.mean([m.precision for m in fold_metrics])),
        recall=float(np.mean([m.recall for m in fold_metrics])),
        f1=float(np.mean([m.f1 for m in fold_metrics])),
        auc=float(np.mean(aucs)) if aucs else None,
        confusion=(tp, fp, tn, fn),
        threshold=fold_metrics[0].threshold,
    )


def _jaccard(a, b) -> float:
    sa, sb = set(a), set(b)
    union = sa | sb
    return len(sa & sb) / len(union) if union else 0.0


def run_cv(table: Table, rule: LabelRule, cfg) -> RunReport:
    """Unified cross-validation over the four-model comparison.

    Preprocessing, selection, and class weights are all fitted inside
    each training fold. A failure in any fold aborts the run with the
    fold id attached.
    """
    feature_table, labels = derive_label(table, rule)
    folds = stratified_folds(labels, cfg.n_folds, cfg.seed)
    reports = []
    for fold_id, (train_idx, test_idx) in enumerate(folds):
        try:
            reports.append(
                run_fold(feature_table, labels, fold_id, train_idx, test_idx, cfg)
            )
        except Exception as exc:
            raise type(exc)(f"fold {fold_id}: {exc}") from exc

    model_names = list(reports[0].metrics.keys())
    mean_metrics = {
        name: _mean_metrics([r.metrics[name] for r in reports]) for name in model_names
    }

    pooled_roc = {}
    for name in model_names:
        pooled_labels = np.concatenate([labels[list(r.test_indices)] for r in reports])
        pooled_probs = np.concatenate([r.test_probs[name] for r in reports])
        pooled_roc[name], _ = roc_auc(pooled_labels, pooled_probs)

    stability = []
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            stability.append(
                {
                    "fold_a": i,
                    "fold_b": j,
                    "jaccard": _jaccard(
                        reports[i].selection.selected_names,
                        reports[j].selection.selected_names,
                    ),
                }
            )

    metadata = {
        "config": cfg.to_dict(),
        "kernel": linear.kernel_name(),
        "n_rows": int(labels.size),
        "n_positive": int(labels.sum()),
    }
    return RunReport(
        folds=tuple(reports),
        mean_metrics=mean_metrics,
        pooled_roc=pooled_roc,
        selection_stability=tuple(stability),
        metadata=metadata,
    )


def final_refit(table: Table, rule: LabelRule, cfg):
    """Re-fit plan, selection, and the hybrid head on every row, then
    rank the selected features by permutation importance."""
    feature_table, labels = derive_label(table, rule)
    plan = fit_plan(feature_table, cfg.preprocess_threshold)
    dm = apply_plan(plan, feature_table, labels)
    if cfg.selection.method == PROTOTYPE_METHOD:
        sel = select.select_prototype(dm, cfg.selection, fold_id=None)
    else:
        sel = select.select_refined(dm, cfg.selection, fold_id=None)
    dm_sel = dm.restrict(list(sel.selected_indices))
    model = mlp.train(dm_sel, _seeded(cfg.mlp_hybrid, cfg.seed + 3000))
    importance = permutation_importance(
        _predictor(model),
        dm_sel.values,
        labels,
        feature_names=list(dm_sel.feature_names),
        repeats=cfg.importance_repeats,
        seed=cfg.seed + 4000,
    )
    return plan, sel, model, importance
