"""Correlation, error and binned classification metrics.

Undefined values (zero variance) are returned as ``nan``; pass
``strict=True`` to :func:`pearson` / :func:`spearman` to raise instead.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ASPECTS, EvalConfig, PairSet, PredictionRecord, PredictionSet
from .errors import (
    InsufficientDataError,
    ShapeError,
    UndefinedMetricError,
    ValidationError,
)


def _pair_arrays(xs: Sequence[float], ys: Sequence[float], min_n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ShapeError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.shape[0] < min_n:
        raise InsufficientDataError(f"need at least {min_n} values, got {x.shape[0]}")
    return x, y


def pearson(xs: Sequence[float], ys: Sequence[float], strict: bool = False) -> float:
    """Product-moment correlation using population (divide-by-n) moments."""
    x, y = _pair_arrays(xs, ys, 2)
    n = x.shape[0]
    dx = x - x.sum() / n
    dy = y - y.sum() / n
    sxx = float(np.dot(dx, dx)) / n
    syy = float(np.dot(dy, dy)) / n
    if sxx == 0.0 or syy == 0.0:
        if strict:
            raise UndefinedMetricError("pearson undefined: zero variance input")
        return math.nan
    sxy = float(np.dot(dx, dy)) / n
    # dividing in two steps avoids underflow of sxx * syy for tiny spreads
    r = sxy / math.sqrt(sxx) / math.sqrt(syy)
    return min(1.0, max(-1.0, r))


def rankdata(values: Sequence[float]) -> np.ndarray:
    """1-based fractional ranks; ties share the average of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    sorted_v = v[order]
    i = 0
    n = v.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float], strict: bool = False) -> float:
    x, y = _pair_arrays(xs, ys, 2)
    return pearson(rankdata(x), rankdata(y), strict=strict)


def mse(preds: Sequence[float], golds: Sequence[float]) -> float:
    p, g = _pair_arrays(preds, golds, 1)
    d = p - g
    return float(np.dot(d, d)) / p.shape[0]


@dataclass(frozen=True)
class ClassificationReport:
    acc: float
    prec: float
    recall: float
    f1_macro: float
    f1_weighted: float
    labels: tuple = (0, 1)


def classification_report(pred_bins: Sequence, gold_bins: Sequence,
                          labels: Sequence = (0, 1)) -> ClassificationReport:
    """Accuracy plus macro precision/recall/F1 and support-weighted F1.

    Per-class ratios with a zero denominator count as 0, so a class that
    never occurs in gold or predictions contributes 0 to the macro means.
    """
    pred = list(pred_bins)
    gold = list(gold_bins)
    if len(pred) != len(gold):
        raise ShapeError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise InsufficientDataError("classification_report needs at least one item")
    labels = tuple(labels)
    unknown = (set(pred) | set(gold)) - set(labels)
    if unknown:
        raise ValidationError(f"labels {sorted(unknown)} not in declared label set {labels}")
    n = len(pred)
    correct = sum(1 for p, g in zip(pred, gold) if p == g)
    precs, recs, f1s, supports = [], [], [], []
    for c in labels:
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp = sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn = sum(1 for p, g in zip(pred, gold) if p != c and g == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
        supports.append(tp + fn)
    k = len(labels)
    return ClassificationReport(
        acc=correct / n,
        prec=sum(precs) / k,
        recall=sum(recs) / k,
        f1_macro=sum(f1s) / k,
        f1_weighted=sum(f * s for f, s in zip(f1s, supports)) / n,
        labels=labels,
    )


# ---------------------------------------------------------------------------
# joined evaluation


@dataclass(frozen=True)
class JoinedScores:
    pair_ids: tuple[str, ...]
    preds: tuple[float, ...]
    golds: tuple[float, ...]
    records: tuple[PredictionRecord, ...]
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.pair_ids)


def join_predictions(preds: PredictionSet, pairs: PairSet, aspect: str) -> JoinedScores:
    """Match ``aspect`` predictions to gold scores, sorted by pair_id.

    At most one prediction per pair may remain for the aspect; aggregate
    swap variants first when a file holds both.
    """
    if aspect not in ASPECTS:
        raise ValidationError(f"unknown aspect {aspect!r}")
    by_pair: dict[str, PredictionRecord] = {}
    warnings = []
    for rec in preds.for_aspect(aspect):
        if rec.pair_id in by_pair:
            raise ValidationError(
                f"several {aspect} predictions for pair {rec.pair_id!r}; "
                "select a swap variant (standard, reverse or mean) first")
        by_pair[rec.pair_id] = rec
    rows = []
    for pid in sorted(by_pair):
        pair = pairs.get(pid)
        if pair is None:
            warnings.append(f"prediction for unknown pair_id {pid!r} ignored")
            continue
        if aspect not in pair.gold:
            warnings.append(f"pair {pid!r} has no {aspect} gold score; skipped")
            continue
        rows.append((pid, by_pair[pid].score, pair.gold[aspect], by_pair[pid]))
    return JoinedScores(
        pair_ids=tuple(r[0] for r in rows),
        preds=tuple(r[1] for r in rows),
        golds=tuple(r[2] for r in rows),
        records=tuple(r[3] for r in rows),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class EvalReport:
    r: float
    rho: float
    mse: float
    acc: float
    prec: float
    recall: float
    f1_macro: float
    f1_weighted: float
    n: int
    threshold: float
    aspect: str = "empathy"
    binning: str = "threshold"
    warnings: tuple[str, ...] = field(default=(), compare=False)

    METRIC_COLUMNS = ("r", "rho", "mse", "acc", "prec", "recall", "f1_macro", "f1_weighted")

    def to_dict(self) -> dict:
        out = {
            "aspect": self.aspect,
            "n": self.n,
            "threshold": self.threshold,
            "binning": self.binning,
        }
        for k in self.METRIC_COLUMNS:
            v = getattr(self, k)
            out[k] = None if math.isnan(v) else v
        out["warnings"] = list(self.warnings)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        metrics = {k: (math.nan if d[k] is None else float(d[k])) for k in cls.METRIC_COLUMNS}
        return cls(n=int(d["n"]), threshold=float(d["threshold"]), aspect=d["aspect"],
                   binning=d.get("binning", "threshold"),
                   warnings=tuple(d.get("warnings", ())), **metrics)


def evaluate(preds: PredictionSet, pairs: PairSet, aspect: str,
             config: Optional[EvalConfig] = None) -> EvalReport:
    config = config or EvalConfig()
    joined = join_predictions(preds, pairs, aspect)
    if len(joined) == 0:
        raise InsufficientDataError(f"no predictions matched gold {aspect} scores")
    if len(joined) >= 2:
        r = pearson(joined.preds, joined.golds)
        rho = spearman(joined.preds, joined.golds)
    else:
        r = rho = math.nan
    cls = classification_report(
        [config.to_class(p) for p in joined.preds],
        [config.to_class(g) for g in joined.golds],
        labels=config.class_labels(),
    )
    return EvalReport(
        r=r, rho=rho, mse=mse(joined.preds, joined.golds),
        acc=cls.acc, prec=cls.prec, recall=cls.recall,
        f1_macro=cls.f1_macro, f1_weighted=cls.f1_weighted,
        n=len(joined), threshold=config.bin_threshold, aspect=aspect,
        binning=config.binning, warnings=joined.warnings,
    )


# ---------------------------------------------------------------------------
# aspect cross-correlation


@dataclass(frozen=True)
class AspectCorrelationMatrix:
    aspects: tuple[str, ...]
    pearson: np.ndarray
    spearman: np.ndarray
    n: int

    def to_dict(self) -> dict:
        def clean(m):
            return [[None if math.isnan(v) else float(v) for v in row] for row in m]
        return {
            "aspects": list(self.aspects),
            "n": self.n,
            "pearson": clean(self.pearson),
            "spearman": clean(self.spearman),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AspectCorrelationMatrix":
        def load(m):
            return np.array([[math.nan if v is None else v for v in row] for row in m],
                            dtype=np.float64)
        return cls(tuple(d["aspects"]), load(d["pearson"]), load(d["spearman"]), int(d["n"]))


def aspect_correlation(pairs: PairSet, aspects: Sequence[str] = ASPECTS) -> AspectCorrelationMatrix:
    """Pairwise correlation between gold aspect columns.

    Only pairs carrying every requested aspect are used. Constant columns
    give ``nan`` across their row and column, including the diagonal.
    """
    aspects = tuple(aspects)
    rows = [p for p in sorted(pairs, key=lambda p: p.pair_id)
            if all(a in p.gold for a in aspects)]
    if len(rows) < 2:
        raise InsufficientDataError(
            f"need at least 2 pairs carrying all of {', '.join(aspects)}; got {len(rows)}")
    cols = [np.array([p.gold[a] for p in rows]) for a in aspects]
    k = len(aspects)
    pm = np.full((k, k), math.nan)
    sm = np.full((k, k), math.nan)
    for i in range(k):
        if np.ptp(cols[i]) > 0:
            pm[i, i] = sm[i, i] = 1.0
        for j in range(i + 1, k):
            pm[i, j] = pm[j, i] = pearson(cols[i], cols[j])
            sm[i, j] = sm[j, i] = spearman(cols[i], cols[j])
    return AspectCorrelationMatrix(aspects, pm, sm, len(rows))
