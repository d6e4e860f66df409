"""Element-saliency metrics (AUC, CC, KL), reports, and cross-validation.

AUC treats the top ceil(0.2 k) ground-truth elements as the positive class
(ties broken toward the lower index) and sweeps prediction thresholds into
a trapezoidal ROC area, which equals the Mann-Whitney pairwise statistic
with ties counted half. CC is the Pearson correlation with constant
vectors scoring 0. KL is KL(gt || pred) with 1e-12 smoothing, natural log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from uisal.errors import DataError, UndefinedMetricError
from uisal.features import UiScreen
from uisal.rng import SeededRng

KL_EPS = 1e-12


def _as_vector(v, name: str) -> np.ndarray:
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise DataError(f"{name} must be a 1-D vector, got shape {out.shape}")
    return out


def _check_pair(gt, pred) -> tuple[np.ndarray, np.ndarray]:
    gt = _as_vector(gt, "gt")
    pred = _as_vector(pred, "pred")
    if gt.shape != pred.shape:
        raise DataError(f"gt has length {gt.size} but pred has length {pred.size}")
    if gt.size < 2:
        raise UndefinedMetricError("metrics need at least 2 elements")
    return gt, pred


def positive_set(gt: np.ndarray) -> np.ndarray:
    """Boolean mask of the top ceil(0.2 k) ground-truth elements.

    Ties at the cut are broken toward the lower element index.
    """
    k = gt.size
    n_pos = math.ceil(0.2 * k)
    order = np.lexsort((np.arange(k), -gt))
    mask = np.zeros(k, dtype=bool)
    mask[order[:n_pos]] = True
    return mask


def auc(gt, pred) -> float:
    """ROC area for recovering the most-fixated elements from predictions."""
    gt, pred = _check_pair(gt, pred)
    pos = positive_set(gt)
    n_pos = int(pos.sum())
    n_neg = gt.size - n_pos
    if n_neg == 0:
        raise UndefinedMetricError(
            "every element is in the positive set; AUC needs a negative class"
        )
    tpr = [0.0]
    fpr = [0.0]
    for tau in np.unique(pred)[::-1]:
        sel = pred >= tau
        tpr.append(float(sel[pos].sum()) / n_pos)
        fpr.append(float(sel[~pos].sum()) / n_neg)
    return float(np.trapezoid(tpr, fpr))


def cc(gt, pred, return_degenerate: bool = False):
    """Pearson correlation; constant vectors score 0 (flagged degenerate)."""
    gt, pred = _check_pair(gt, pred)
    degenerate = bool(gt.min() == gt.max() or pred.min() == pred.max())
    if degenerate:
        value = 0.0
    else:
        a = gt - gt.mean()
        b = pred - pred.mean()
        value = float(np.dot(a, b) / np.sqrt(np.dot(a, a) * np.dot(b, b)))
    if return_degenerate:
        return value, degenerate
    return value


def kl(gt, pred) -> float:
    """KL(gt || pred) with epsilon smoothing; both inputs must sum to 1."""
    gt, pred = _check_pair(gt, pred)
    for name, v in (("gt", gt), ("pred", pred)):
        if abs(float(v.sum()) - 1.0) > 1e-6:
            raise DataError(f"{name} sums to {v.sum():.9f}; KL needs distributions")
        if np.any(v < 0):
            raise DataError(f"{name} has negative entries")
    return float(np.sum(gt * np.log((gt + KL_EPS) / (pred + KL_EPS))))


@dataclass
class MetricReport:
    """Per-screen metrics, their unweighted means, and skipped screens."""

    per_screen: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    @property
    def mean(self) -> dict:
        if not self.per_screen:
            return {"auc": float("nan"), "cc": float("nan"), "kl": float("nan")}
        return {
            key: float(np.mean([row[key] for row in self.per_screen]))
            for key in ("auc", "cc", "kl")
        }

    def to_dict(self) -> dict:
        return {
            "per_screen": self.per_screen,
            "mean": self.mean,
            "skipped": self.skipped,
        }


def evaluate_pairs(rows: Sequence[tuple[str, np.ndarray, np.ndarray]]) -> MetricReport:
    """Builds a MetricReport from (screen id, gt, pred) rows."""
    if not rows:
        raise DataError("cannot evaluate an empty dataset")
    report = MetricReport()
    for sid, gt, pred in rows:
        try:
            row = {
                "id": sid,
                "auc": auc(gt, pred),
                "cc": cc(gt, pred),
                "kl": kl(gt, pred),
            }
        except UndefinedMetricError as exc:
            report.skipped.append({"id": sid, "reason": str(exc)})
            continue
        report.per_screen.append(row)
    return report


def evaluate_dataset(
    predict_fn: Callable[[UiScreen], np.ndarray], screens: Sequence[UiScreen]
) -> MetricReport:
    """Evaluates a predictor against every screen's ground truth."""
    if not screens:
        raise DataError("cannot evaluate an empty dataset")
    rows = []
    for i, screen in enumerate(screens):
        if screen.ground_truth is None:
            sid = screen.screen_id if screen.screen_id is not None else str(i)
            raise DataError(f"screen {sid} has no ground truth")
        sid = screen.screen_id if screen.screen_id is not None else str(i)
        rows.append((sid, screen.ground_truth, np.asarray(predict_fn(screen))))
    return evaluate_pairs(rows)


def fold_split(n: int, seed: int, k: int = 4) -> list[np.ndarray]:
    """Seeded shuffle of range(n) into k disjoint folds with sizes within 1."""
    if n < k:
        raise DataError(f"need at least {k} screens for {k}-fold splits, got {n}")
    perm = SeededRng(seed).derive("fold-split").permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def crossval(
    screens: Sequence[UiScreen],
    train_fn: Callable[[list[UiScreen], int], Callable[[UiScreen], np.ndarray]],
    seed: int,
    k: int = 4,
) -> dict:
    """k-fold cross-validation: train on k-1 folds, evaluate on the held-out one.

    `train_fn(train_screens, fold_index)` must return a predictor callable.
    Returns fold reports, the pooled mean of fold means, and the unweighted
    mean over all per-screen rows.
    """
    folds = fold_split(len(screens), seed, k=k)
    fold_reports: list[MetricReport] = []
    for fi, test_idx in enumerate(folds):
        test_set = set(int(i) for i in test_idx)
        train_screens = [s for i, s in enumerate(screens) if i not in test_set]
        test_screens = [screens[i] for i in test_idx]
        predictor = train_fn(train_screens, fi)
        fold_reports.append(evaluate_dataset(predictor, test_screens))
    pooled = {
        key: float(np.mean([r.mean[key] for r in fold_reports]))
        for key in ("auc", "cc", "kl")
    }
    all_rows = [row for r in fold_reports for row in r.per_screen]
    per_screen_mean = {
        key: float(np.mean([row[key] for row in all_rows])) if all_rows else float("nan")
        for key in ("auc", "cc", "kl")
    }
    return {
        "folds": [r.to_dict() for r in fold_reports],
        "pooled_mean": pooled,
        "per_screen_mean": per_screen_mean,
    }
