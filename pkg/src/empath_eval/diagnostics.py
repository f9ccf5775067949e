"""Error and learning-failure analyses.

Severe-error counts per gold bucket, the per-class probability profile
compared against the empirical label prior P(Y), and confusion matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CLASSES,
    GRID,
    SCORE_MAX,
    SCORE_MIN,
    EvalConfig,
    PairSet,
    PredictionSet,
    RowError,
    aspect_values,
    grid_bucket,
    on_grid,
    round_score,
)
from .errors import InsufficientDataError, SchemaError
from .metrics import join_predictions

CONFUSION_MODES = ("argmax-probs", "rounded-score")
KL_SMOOTHING = 1e-12


# ---------------------------------------------------------------------------
# severe errors


@dataclass(frozen=True)
class SevereErrorRow:
    gold: float
    split_count: int
    error_count: int


@dataclass(frozen=True)
class SevereErrorTable:
    rows: tuple[SevereErrorRow, ...]
    delta: float
    aspect: str = "empathy"
    warnings: tuple[str, ...] = ()

    @property
    def total_errors(self) -> int:
        return sum(r.error_count for r in self.rows)

    @property
    def total(self) -> int:
        return sum(r.split_count for r in self.rows)

    def row(self, gold: float) -> SevereErrorRow:
        for r in self.rows:
            if r.gold == gold:
                return r
        raise KeyError(gold)

    def to_dict(self) -> dict:
        return {
            "aspect": self.aspect,
            "delta": self.delta,
            "rows": [{"gold": r.gold, "split_count": r.split_count, "error_count": r.error_count}
                     for r in self.rows],
            "total": self.total,
            "total_errors": self.total_errors,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SevereErrorTable":
        rows = tuple(SevereErrorRow(float(r["gold"]), int(r["split_count"]), int(r["error_count"]))
                     for r in d["rows"])
        return cls(rows, float(d["delta"]), d.get("aspect", "empathy"), tuple(d.get("warnings", ())))


def severe_error_table(preds: PredictionSet, pairs: PairSet, aspect: str,
                       config: Optional[EvalConfig] = None) -> SevereErrorTable:
    """Count predictions off by strictly more than ``severe_error_delta``, per gold bucket.

    Off-grid gold scores go to the nearest 0.5 bucket, with a warning.
    """
    config = config or EvalConfig()
    joined = join_predictions(preds, pairs, aspect)
    if len(joined) == 0:
        raise InsufficientDataError(f"no predictions matched gold {aspect} scores")
    warnings = list(joined.warnings)
    split_counts = {g: 0 for g in GRID}
    error_counts = {g: 0 for g in GRID}
    off_grid = []
    for pid, pred, gold in zip(joined.pair_ids, joined.preds, joined.golds):
        bucket = grid_bucket(gold)
        if not on_grid(gold):
            off_grid.append(pid)
        split_counts[bucket] += 1
        if abs(pred - gold) > config.severe_error_delta:
            error_counts[bucket] += 1
    if off_grid:
        warnings.append(f"{len(off_grid)} gold score(s) off the 0.5 grid were counted under the "
                        f"nearest bucket (first: pair {off_grid[0]!r})")
    rows = tuple(SevereErrorRow(g, split_counts[g], error_counts[g]) for g in GRID)
    return SevereErrorTable(rows, config.severe_error_delta, aspect, tuple(warnings))


# ---------------------------------------------------------------------------
# label prior and probability profile


def _class_counts(values, rounding: str) -> np.ndarray:
    counts = np.zeros(len(CLASSES), dtype=np.int64)
    for v in values:
        counts[round_score(v, rounding) - 1] += 1
    return counts


def empirical_distribution(pairs: PairSet, aspect: str, split: Optional[str] = None,
                           rounding: str = "half-down") -> tuple[float, ...]:
    """Share of pairs whose rounded gold falls into each class 1..4."""
    values = aspect_values(pairs.select(split), aspect)
    if not values:
        where = f"split {split!r}" if split is not None else "pair set"
        raise InsufficientDataError(f"{where} has no pairs")
    counts = _class_counts(values, rounding)
    return tuple(float(c) / len(values) for c in counts)


def total_variation(p, q) -> float:
    return 0.5 * math.fsum(abs(a - b) for a, b in zip(p, q))


def max_abs_diff(p, q) -> float:
    return max(abs(a - b) for a, b in zip(p, q))


def kl_divergence(p, q, eps: float = KL_SMOOTHING) -> float:
    """KL(p || q) with zero cells of both vectors lifted to ``eps`` and renormalized."""
    ps = np.maximum(np.asarray(p, dtype=np.float64), eps)
    qs = np.maximum(np.asarray(q, dtype=np.float64), eps)
    ps /= ps.sum()
    qs /= qs.sum()
    return float(np.sum(ps * np.log(ps / qs)))


@dataclass(frozen=True)
class GroupProfile:
    gold_class: int
    n: int
    profile: Optional[tuple[float, ...]]
    max_abs: Optional[float] = None
    tv: Optional[float] = None
    kl: Optional[float] = None

    @property
    def absent(self) -> bool:
        return self.profile is None


@dataclass(frozen=True)
class ProbabilityProfile:
    groups: tuple[GroupProfile, ...]
    empirical: tuple[float, ...]
    aspect: str = "empathy"
    rounding: str = "half-down"
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def group(self, gold_class: int) -> GroupProfile:
        return self.groups[gold_class - 1]

    @property
    def n_per_group(self) -> dict[int, int]:
        return {g.gold_class: g.n for g in self.groups}

    def to_dict(self) -> dict:
        return {
            "aspect": self.aspect,
            "rounding": self.rounding,
            "empirical": list(self.empirical),
            "groups": [
                {"gold_class": g.gold_class, "n": g.n,
                 "profile": None if g.profile is None else list(g.profile),
                 "max_abs": g.max_abs, "tv": g.tv, "kl": g.kl}
                for g in self.groups
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbabilityProfile":
        groups = tuple(
            GroupProfile(int(g["gold_class"]), int(g["n"]),
                         None if g["profile"] is None else tuple(float(x) for x in g["profile"]),
                         g["max_abs"], g["tv"], g["kl"])
            for g in d["groups"]
        )
        return cls(groups, tuple(float(x) for x in d["empirical"]), d.get("aspect", "empathy"),
                   d.get("rounding", "half-down"), tuple(d.get("warnings", ())))


def probability_profile(preds: PredictionSet, pairs: PairSet, aspect: str,
                        rounding: str = "half-down", split: Optional[str] = None,
                        empirical: Optional[tuple[float, ...]] = None) -> ProbabilityProfile:
    """Mean predicted class distribution per rounded gold class, set against P(Y).

    P(Y) is computed from the pairs of ``split`` (all pairs when None)
    unless ``empirical`` is given. Groups without members are kept but
    marked absent.
    """
    joined = join_predictions(preds, pairs, aspect)
    if len(joined) == 0:
        raise InsufficientDataError(f"no predictions matched gold {aspect} scores")
    missing = [pid for pid, rec in zip(joined.pair_ids, joined.records) if rec.probs is None]
    if missing:
        raise SchemaError(f"{len(missing)} prediction(s) lack probs, first {missing[0]!r}")
    if empirical is None:
        empirical = empirical_distribution(pairs, aspect, split, rounding)
    members: dict[int, list[tuple[float, ...]]] = {c: [] for c in CLASSES}
    for rec, gold in zip(joined.records, joined.golds):
        members[round_score(gold, rounding)].append(rec.probs)
    groups = []
    for c in CLASSES:
        rows = members[c]
        if not rows:
            groups.append(GroupProfile(c, 0, None))
            continue
        # fixed-order reduction keeps results independent of pair order
        prof = tuple(math.fsum(col) / len(rows) for col in zip(*rows))
        groups.append(GroupProfile(c, len(rows), prof, max_abs_diff(prof, empirical),
                                   total_variation(prof, empirical),
                                   kl_divergence(prof, empirical)))
    return ProbabilityProfile(tuple(groups), tuple(empirical), aspect, rounding, joined.warnings)


# ---------------------------------------------------------------------------
# confusion matrix


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray
    mode: str
    aspect: str = "empathy"
    errors: tuple[RowError, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> list[int]:
        return [int(x) for x in self.counts.sum(axis=1)]

    def to_dict(self) -> dict:
        return {
            "aspect": self.aspect,
            "mode": self.mode,
            "classes": list(CLASSES),
            "matrix": self.counts.tolist(),
            "errors": [str(e) for e in self.errors],
            "warnings": list(self.warnings),
        }


def argmax_low(probs) -> int:
    """Index of the largest entry, ties going to the lowest index."""
    best = 0
    for i, p in enumerate(probs):
        if p > probs[best]:
            best = i
    return best


def confusion_matrix(preds: PredictionSet, pairs: PairSet, aspect: str,
                     rounding: str = "half-down", mode: str = "rounded-score") -> ConfusionMatrix:
    """4x4 counts with gold class rows and predicted class columns.

    In ``rounded-score`` mode scores outside [1, 4] are clipped before
    rounding. In ``argmax-probs`` mode records without probs are reported
    as errors and left out of the matrix.
    """
    if mode not in CONFUSION_MODES:
        raise SchemaError(f"unknown confusion mode {mode!r}; expected one of {CONFUSION_MODES}")
    counts = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
    joined = join_predictions(preds, pairs, aspect)
    errors = []
    for i, (pid, rec, gold) in enumerate(zip(joined.pair_ids, joined.records, joined.golds), 1):
        if mode == "argmax-probs":
            if rec.probs is None:
                errors.append(RowError(i, "schema", f"prediction for {pid!r} has no probs"))
                continue
            col = argmax_low(rec.probs)
        else:
            col = round_score(min(max(rec.score, SCORE_MIN), SCORE_MAX), rounding) - 1
        counts[round_score(gold, rounding) - 1, col] += 1
    return ConfusionMatrix(counts, mode, aspect, tuple(errors), joined.warnings)
