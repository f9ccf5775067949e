"""Inter-annotator agreement.

Correlations and Cohen's kappa are computed for every unordered pair of
annotators on the items both rated, then averaged without weights.
Krippendorff's alpha is computed once over the whole group, with missing
cells allowed.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Hashable, Optional

from . import metrics
from .core import (
    ASPECTS,
    SETTINGS,
    VMN_ORDINAL,
    AnnotationSet,
    round_score,
)
from .errors import (
    InsufficientDataError,
    RosterError,
    SchemaError,
    ShapeError,
    ValidationError,
)

METRICS = ("pearson", "spearman", "krippendorff_alpha", "cohen_kappa")
PAIRWISE_METRICS = ("pearson", "spearman", "kappa")
LEVELS = ("nominal", "ordinal", "interval")
DISCRETIZERS = ("round-half-down-int", "half-grid", "vmn-passthrough", "identity")

MIN_OVERLAP = 2


def numeric(value: Any) -> float:
    """Map V/M/N to 3/2/1; pass numbers through."""
    if isinstance(value, str):
        try:
            return float(VMN_ORDINAL[value])
        except KeyError:
            raise ValidationError(f"unknown class label {value!r}") from None
    return float(value)


def discretize(values: Iterable[Any], discretizer: str) -> list:
    if discretizer in ("vmn-passthrough", "identity"):
        return list(values)
    out = []
    for v in values:
        if isinstance(v, str):
            raise ValidationError(
                f"discretizer {discretizer!r} expects numeric scores, got label {v!r}")
        if discretizer == "round-half-down-int":
            out.append(round_score(float(v), "half-down"))
        elif discretizer == "half-grid":
            out.append(math.ceil(2.0 * float(v) - 0.5) / 2.0)
        else:
            raise SchemaError(f"unknown discretizer {discretizer!r}; expected one of {DISCRETIZERS}")
    return out


# ---------------------------------------------------------------------------
# Cohen's kappa


def cohen_kappa(a: Sequence, b: Sequence, discretizer: str = "round-half-down-int") -> float:
    """Unweighted kappa over the union of observed categories; ``nan`` when p_e = 1."""
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise InsufficientDataError("cohen_kappa needs at least one co-rated item")
    da = discretize(a, discretizer)
    db = discretize(b, discretizer)
    n = len(da)
    cats = sorted(set(da) | set(db), key=_sort_key)
    p_o = sum(1 for x, y in zip(da, db) if x == y) / n
    p_e = math.fsum((da.count(c) / n) * (db.count(c) / n) for c in cats)
    if p_e >= 1.0:
        return math.nan
    return (p_o - p_e) / (1.0 - p_e)


def _sort_key(v: Any) -> tuple:
    return (0, v, "") if not isinstance(v, str) else (1, 0, v)


# ---------------------------------------------------------------------------
# Krippendorff's alpha


def _delta_fn(level: str, values: Sequence[Hashable], counts: Mapping[Hashable, float]):
    if level == "nominal":
        return lambda c, k: 0.0 if c == k else 1.0
    if level == "interval":
        return lambda c, k: (numeric(c) - numeric(k)) ** 2
    if level == "ordinal":
        # squared distance between mid-ranks in the pooled pairable values
        ordered = sorted(values, key=numeric)
        midrank = {}
        below = 0.0
        for v in ordered:
            midrank[v] = below + (counts[v] + 1.0) / 2.0
            below += counts[v]
        return lambda c, k: (midrank[c] - midrank[k]) ** 2
    raise SchemaError(f"unknown level {level!r}; expected one of {LEVELS}")


def alpha_from_units(units: Iterable[Sequence[Hashable]], level: str = "interval") -> float:
    """Krippendorff's alpha from per-item rating lists (missing ratings omitted).

    Uses the coincidence-matrix form ``1 - D_o / D_e``. Items with fewer
    than two ratings are not pairable and are dropped.
    """
    pairable = [list(u) for u in units if len(u) >= 2]
    if not pairable:
        raise InsufficientDataError("krippendorff_alpha needs an item with at least 2 ratings")
    if level == "interval" or level == "ordinal":
        pairable = [[_canon(v) for v in u] for u in pairable]
    coincidence: dict[tuple, float] = {}
    for u in pairable:
        m = len(u)
        for i, j in itertools.permutations(range(m), 2):
            key = (u[i], u[j])
            coincidence[key] = coincidence.get(key, 0.0) + 1.0 / (m - 1)
    values = sorted({c for c, _ in coincidence}, key=_sort_key)
    n_c = {v: 0.0 for v in values}
    cells = sorted(coincidence.items(), key=lambda kv: (_sort_key(kv[0][0]), _sort_key(kv[0][1])))
    for (c, _), o in cells:
        n_c[c] += o
    n = math.fsum(n_c.values())
    delta = _delta_fn(level, values, n_c)
    d_o = math.fsum(o * delta(c, k) for (c, k), o in cells)
    d_e = math.fsum(n_c[c] * n_c[k] * delta(c, k) for c in values for k in values)
    if d_e == 0.0:
        return math.nan
    return 1.0 - (n - 1.0) * d_o / d_e


def _canon(v: Any) -> Any:
    """Interval/ordinal levels compare numerically, so 2 and 2.0 are one value."""
    return v if isinstance(v, str) else float(v)


def units_from_ratings(ratings: Mapping[str, Mapping[Hashable, Any]]) -> list[list]:
    items: dict[Hashable, list] = {}
    for annotator in sorted(ratings):
        for item, value in ratings[annotator].items():
            items.setdefault(item, []).append(value)
    return [items[k] for k in sorted(items, key=_item_key)]


def _item_key(item: Hashable) -> tuple:
    return item if isinstance(item, tuple) else ("", item)


def krippendorff_alpha(annotations: AnnotationSet, aspect: str, setting: str,
                       level: str = "interval",
                       annotators: Optional[Iterable[str]] = None) -> float:
    ratings = annotations.ratings(aspect, setting, annotators)
    if len(ratings) < 2:
        raise InsufficientDataError(
            f"krippendorff_alpha needs at least 2 annotators for {aspect}/{setting}")
    return alpha_from_units(units_from_ratings(ratings), level)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class AgreementReport:
    metric_values: dict[str, float]
    group: tuple[str, ...]
    aspect: str
    setting: str
    n_items: int
    group_name: str = "all"
    pairwise_matrix: Optional[dict[str, dict[str, float]]] = None
    skipped_pairs: tuple[tuple[str, str], ...] = ()
    undefined_pairs: tuple[tuple[str, str], ...] = ()
    n_pairs_used: Optional[int] = None
    missing_items: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def clean(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v
        out = {
            "group_name": self.group_name,
            "group": list(self.group),
            "aspect": self.aspect,
            "setting": self.setting,
            "n_items": self.n_items,
            "metric_values": {k: clean(v) for k, v in self.metric_values.items()},
            "skipped_pairs": [list(p) for p in self.skipped_pairs],
            "undefined_pairs": [list(p) for p in self.undefined_pairs],
            "n_pairs_used": self.n_pairs_used,
            "missing_items": list(self.missing_items),
        }
        if self.pairwise_matrix is not None:
            out["pairwise_matrix"] = {
                a: {b: clean(v) for b, v in row.items()}
                for a, row in self.pairwise_matrix.items()
            }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AgreementReport":
        def load(v):
            return math.nan if v is None else float(v)
        matrix = d.get("pairwise_matrix")
        if matrix is not None:
            matrix = {a: {b: load(v) for b, v in row.items()} for a, row in matrix.items()}
        return cls(
            metric_values={k: load(v) for k, v in d["metric_values"].items()},
            group=tuple(d["group"]),
            aspect=d["aspect"],
            setting=d["setting"],
            n_items=int(d["n_items"]),
            group_name=d.get("group_name", "all"),
            pairwise_matrix=matrix,
            skipped_pairs=tuple(tuple(p) for p in d.get("skipped_pairs", ())),
            undefined_pairs=tuple(tuple(p) for p in d.get("undefined_pairs", ())),
            n_pairs_used=d.get("n_pairs_used"),
            missing_items=tuple(d.get("missing_items", ())),
        )


def _pair_metric(metric: str, xs: list, ys: list, discretizer: str) -> float:
    if metric == "pearson":
        return metrics.pearson([numeric(v) for v in xs], [numeric(v) for v in ys])
    if metric == "spearman":
        return metrics.spearman([numeric(v) for v in xs], [numeric(v) for v in ys])
    if metric == "kappa":
        return cohen_kappa(xs, ys, discretizer)
    raise SchemaError(f"unknown pairwise metric {metric!r}; expected one of {PAIRWISE_METRICS}")


def _default_discretizer(setting: str, discretizer: Optional[str]) -> str:
    if setting == "discrete":
        return "vmn-passthrough"
    return discretizer or "round-half-down-int"


def _n_items(ratings: Mapping[str, Mapping]) -> int:
    return len({item for row in ratings.values() for item in row})


def mean_pairwise(annotations: AnnotationSet, aspect: str, setting: str, metric: str,
                  discretizer: Optional[str] = None,
                  annotators: Optional[Iterable[str]] = None,
                  group_name: str = "all") -> AgreementReport:
    """Average ``metric`` over annotator pairs sharing at least two items.

    Pairs with less overlap are listed in ``skipped_pairs``; pairs whose
    value is undefined (a constant annotator) are listed in
    ``undefined_pairs``. Neither enters the mean.
    """
    if metric not in PAIRWISE_METRICS:
        raise SchemaError(f"unknown pairwise metric {metric!r}; expected one of {PAIRWISE_METRICS}")
    discretizer = _default_discretizer(setting, discretizer)
    ratings = annotations.ratings(aspect, setting, annotators)
    names = sorted(ratings)
    if len(names) < 2:
        raise InsufficientDataError(f"need at least 2 annotators for {aspect}/{setting}")
    matrix: dict[str, dict[str, float]] = {a: {a: math.nan} for a in names}
    skipped, undefined, values = [], [], []
    for a, b in itertools.combinations(names, 2):
        shared = sorted(set(ratings[a]) & set(ratings[b]), key=_item_key)
        if len(shared) < MIN_OVERLAP:
            skipped.append((a, b))
            v = math.nan
        else:
            v = _pair_metric(metric, [ratings[a][i] for i in shared],
                             [ratings[b][i] for i in shared], discretizer)
            if math.isnan(v):
                undefined.append((a, b))
            else:
                values.append(v)
        matrix[a][b] = matrix[b][a] = v
    if len(skipped) == len(names) * (len(names) - 1) // 2:
        raise InsufficientDataError(
            f"no annotator pair shares {MIN_OVERLAP} items for {aspect}/{setting}")
    mean = math.fsum(values) / len(values) if values else math.nan
    key = "cohen_kappa" if metric == "kappa" else metric
    return AgreementReport(
        metric_values={key: mean},
        group=tuple(names),
        aspect=aspect,
        setting=setting,
        n_items=_n_items(ratings),
        group_name=group_name,
        pairwise_matrix={a: dict(sorted(row.items())) for a, row in matrix.items()},
        skipped_pairs=tuple(skipped),
        undefined_pairs=tuple(undefined),
        n_pairs_used=len(values),
    )


def agreement_cell(annotations: AnnotationSet, aspect: str, setting: str,
                   annotators: Optional[Iterable[str]] = None, group_name: str = "all",
                   level: Optional[str] = None,
                   discretizer: Optional[str] = None) -> AgreementReport:
    """All four agreement metrics for one (group, aspect, setting) cell.

    Metrics that cannot be computed for lack of data are reported as ``nan``.
    Alpha defaults to the interval level, nominal for V/M/N labels.
    """
    if level is None:
        level = "nominal" if setting == "discrete" else "interval"
    ratings = annotations.ratings(aspect, setting, annotators)
    values: dict[str, float] = {}
    pairwise = None
    skipped: tuple = ()
    undefined: set = set()
    for metric in PAIRWISE_METRICS:
        key = "cohen_kappa" if metric == "kappa" else metric
        try:
            rep = mean_pairwise(annotations, aspect, setting, metric, discretizer,
                                annotators, group_name)
        except InsufficientDataError:
            values[key] = math.nan
            continue
        values[key] = rep.metric_values[key]
        undefined.update(rep.undefined_pairs)
        skipped = rep.skipped_pairs
        if metric == "pearson":
            pairwise = rep.pairwise_matrix
    try:
        values["krippendorff_alpha"] = krippendorff_alpha(annotations, aspect, setting, level,
                                                          annotators)
    except InsufficientDataError:
        values["krippendorff_alpha"] = math.nan
    return AgreementReport(
        metric_values={k: values[k] for k in METRICS},
        group=tuple(sorted(ratings)),
        aspect=aspect,
        setting=setting,
        n_items=_n_items(ratings),
        group_name=group_name,
        pairwise_matrix=pairwise,
        skipped_pairs=skipped,
        undefined_pairs=tuple(sorted(undefined)),
    )


def group_report(annotations: AnnotationSet,
                 groups: Optional[Mapping[str, Sequence[str]]] = None,
                 aspects: Optional[Sequence[str]] = None,
                 settings: Optional[Sequence[str]] = None,
                 level: Optional[str] = None,
                 discretizer: Optional[str] = None) -> list[AgreementReport]:
    """Agreement for every group x aspect x setting cell that has ratings.

    An ``all`` group covering the whole roster is always included. By
    default the settings are those present in the data plus ``combined``
    when both summary and full ratings exist. Rows are sorted by group
    name, aspect and setting.
    """
    roster = set(annotations.roster)
    named: dict[str, tuple[str, ...]] = {"all": tuple(sorted(roster))}
    for name, members in (groups or {}).items():
        members = tuple(sorted(set(members)))
        if not members:
            raise RosterError(f"group {name!r} is empty")
        unknown = [m for m in members if m not in roster]
        if unknown:
            raise RosterError(f"group {name!r} references unknown annotators: {', '.join(unknown)}")
        named[name] = members
    aspects = tuple(aspects) if aspects else annotations.aspects
    for a in aspects:
        if a not in ASPECTS:
            raise SchemaError(f"unknown aspect {a!r}")
    if settings:
        settings = tuple(settings)
    else:
        present = annotations.settings
        settings = present
        if "summary" in present and "full" in present and "combined" not in present:
            settings = present + ("combined",)
    for s in settings:
        if s not in SETTINGS:
            raise SchemaError(f"unknown setting {s!r}")
    rows = []
    for name in sorted(named):
        for aspect in sorted(aspects):
            for setting in sorted(settings):
                if not annotations.ratings(aspect, setting, named[name]):
                    continue
                rows.append(agreement_cell(annotations, aspect, setting, named[name], name,
                                           level, discretizer))
    return rows


def consensus_vs_reference(annotations: AnnotationSet, aspect: str, setting: str,
                           reference: Mapping[str, float],
                           discretizer: Optional[str] = None,
                           level: str = "interval") -> AgreementReport:
    """Compare the per-item mean of annotator ratings against reference scores.

    Alpha and kappa treat the consensus and the reference as two raters.
    Under the discrete setting V/M/N are averaged as 3/2/1.
    """
    if setting == "combined":
        raise SchemaError("consensus_vs_reference needs a single setting, not 'combined'")
    discretizer = discretizer or "round-half-down-int"
    if discretizer == "vmn-passthrough":
        raise SchemaError("consensus scores are numeric; use a numeric discretizer")
    ratings = annotations.ratings(aspect, setting)
    per_item: dict[str, list[float]] = {}
    for annotator in sorted(ratings):
        for item, value in ratings[annotator].items():
            per_item.setdefault(item, []).append(numeric(value))
    shared = sorted(set(per_item) & set(reference))
    if not shared:
        raise InsufficientDataError(f"no annotated {aspect}/{setting} items appear in the reference")
    consensus = [math.fsum(per_item[i]) / len(per_item[i]) for i in shared]
    ref = [float(reference[i]) for i in shared]
    values: dict[str, float] = {}
    if len(shared) >= 2:
        values["pearson"] = metrics.pearson(consensus, ref)
        values["spearman"] = metrics.spearman(consensus, ref)
    else:
        values["pearson"] = values["spearman"] = math.nan
    values["krippendorff_alpha"] = alpha_from_units(
        [[c, r] for c, r in zip(consensus, ref)], level)
    values["cohen_kappa"] = cohen_kappa(consensus, ref, discretizer)
    missing = sorted(set(reference) - set(per_item))
    return AgreementReport(
        metric_values={k: values[k] for k in METRICS},
        group=tuple(sorted(ratings)),
        aspect=aspect,
        setting=setting,
        n_items=len(shared),
        group_name="consensus-vs-reference",
        missing_items=tuple(missing),
    )
