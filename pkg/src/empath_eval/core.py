"""Domain types and the score conventions shared by every module.

Scores live on a 1-4 scale. Gold values are accepted at any real
precision; the 0.5 grid is only used for reporting buckets.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import asdict, dataclass, field
from types import MappingProxyType
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    DuplicateError,
    MissingEmbeddingError,
    NonFiniteError,
    NormalizationError,
    ParseError,
    RangeError,
    SchemaError,
    ShapeError,
    ValidationError,
    ValueTypeError,
)

ASPECTS = ("event", "emotion", "moral", "empathy")
SETTINGS = ("summary", "full", "combined", "discrete")
CONTINUOUS_SETTINGS = ("summary", "full", "combined")
VARIANTS = ("standard", "reverse", "mean")
ROUNDING_MODES = ("half-down", "half-up", "nearest-even")
BINNING_MODES = ("threshold", "int", "round")

# Discrete annotation classes, ordered N < M < V.
VMN_LABELS = ("V", "M", "N")
VMN_ORDINAL = {"N": 1, "M": 2, "V": 3}

SCORE_MIN = 1.0
SCORE_MAX = 4.0
GRID = tuple(1.0 + 0.5 * k for k in range(7))
CLASSES = (1, 2, 3, 4)
PROB_TOLERANCE = 1e-6


# ---------------------------------------------------------------------------
# conventions


def bin_label(score: float, threshold: float = 2.5) -> int:
    """Binary class: 1 iff ``score`` is strictly greater than ``threshold``."""
    if not math.isfinite(score):
        raise NonFiniteError(f"cannot bin non-finite score {score!r}")
    return 1 if score > threshold else 0


def _check_scale(score: float) -> None:
    if not math.isfinite(score):
        raise NonFiniteError(f"non-finite score {score!r}")
    if score < SCORE_MIN or score > SCORE_MAX:
        raise RangeError(f"score {score!r} outside [{SCORE_MIN}, {SCORE_MAX}]")


def round_score(score: float, rounding: str = "half-down") -> int:
    """Round a 1-4 score to an integer class under the named convention."""
    _check_scale(score)
    if rounding == "half-down":
        return int(math.ceil(score - 0.5))
    if rounding == "half-up":
        return int(math.floor(score + 0.5))
    if rounding == "nearest-even":
        return int(round(score))
    raise SchemaError(f"unknown rounding mode {rounding!r}; expected one of {ROUNDING_MODES}")


def round_half_down(score: float) -> int:
    return round_score(score, "half-down")


def grid_bucket(score: float) -> float:
    """Nearest point of the 0.5 grid, exact .25 offsets going down."""
    _check_scale(score)
    return math.ceil(2.0 * score - 0.5) / 2.0


def on_grid(score: float) -> bool:
    return (2.0 * score).is_integer() and SCORE_MIN <= score <= SCORE_MAX


def score_to_class(score: float, mode: str, threshold: float = 2.5,
                   rounding: str = "half-down") -> int:
    """Class label for classification metrics.

    ``threshold`` gives the binary 0/1 split. ``int`` truncates and
    ``round`` rounds (half-down by default) to a class in 1..4; values
    outside the scale are clipped first.
    """
    if mode == "threshold":
        return bin_label(score, threshold)
    if not math.isfinite(score):
        raise NonFiniteError(f"cannot bin non-finite score {score!r}")
    clipped = min(max(score, SCORE_MIN), SCORE_MAX)
    if mode == "int":
        return int(math.floor(clipped))
    if mode == "round":
        return round_score(clipped, rounding)
    raise SchemaError(f"unknown binning mode {mode!r}; expected one of {BINNING_MODES}")


@dataclass(frozen=True)
class EvalConfig:
    bin_threshold: float = 2.5
    severe_error_delta: float = 1.0
    scale_factor: float = 4.0
    rounding: str = "half-down"
    binning: str = "threshold"
    clamp_scaled: bool = False

    def __post_init__(self):
        if not (SCORE_MIN < self.bin_threshold < SCORE_MAX):
            raise RangeError(f"bin_threshold must lie in (1, 4), got {self.bin_threshold}")
        if not self.severe_error_delta > 0:
            raise RangeError("severe_error_delta must be positive")
        if not self.scale_factor > 0:
            raise RangeError("scale_factor must be positive")
        if self.rounding not in ROUNDING_MODES:
            raise SchemaError(f"unknown rounding mode {self.rounding!r}")
        if self.binning not in BINNING_MODES:
            raise SchemaError(f"unknown binning mode {self.binning!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def class_labels(self) -> tuple[int, ...]:
        return (0, 1) if self.binning == "threshold" else CLASSES

    def to_class(self, score: float) -> int:
        return score_to_class(score, self.binning, self.bin_threshold, self.rounding)


# ---------------------------------------------------------------------------
# row-level error bookkeeping


_ERROR_KINDS: dict[str, type[ValidationError]] = {
    "parse": ParseError,
    "duplicate": DuplicateError,
    "range": RangeError,
    "schema": SchemaError,
    "type": ValueTypeError,
    "normalization": NormalizationError,
    "dimension": DimensionError,
    "shape": ShapeError,
    "validity": NonFiniteError,
}


@dataclass(frozen=True)
class RowError:
    """A rejected input row. ``line`` is 1-based (record index for binary input)."""

    line: int
    kind: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"

    @classmethod
    def from_exception(cls, line: int, exc: ValidationError) -> "RowError":
        for kind, exc_type in _ERROR_KINDS.items():
            if type(exc) is exc_type:
                return cls(line, kind, str(exc))
        return cls(line, "schema", str(exc))

    def as_exception(self) -> ValidationError:
        return _ERROR_KINDS.get(self.kind, ValidationError)(str(self))


class _Validated:
    errors: tuple[RowError, ...]

    def raise_for_errors(self) -> None:
        """Raise the first row error (all of them listed in the message)."""
        if not self.errors:
            return
        first = self.errors[0].as_exception()
        if len(self.errors) > 1:
            detail = "; ".join(str(e) for e in self.errors[:10])
            more = f" (+{len(self.errors) - 10} more)" if len(self.errors) > 10 else ""
            first = type(first)(f"{len(self.errors)} invalid rows: {detail}{more}")
        raise first


# ---------------------------------------------------------------------------
# story pairs


class AspectScores(Mapping):
    """Gold similarity values keyed by aspect name; absent aspects are omitted."""

    __slots__ = ("_values",)

    def __init__(self, values: Optional[Mapping[str, float]] = None, **kwargs: float):
        merged = dict(values or {})
        merged.update(kwargs)
        clean = {}
        for aspect, value in merged.items():
            if value is None:
                continue
            if aspect not in ASPECTS:
                raise SchemaError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
            value = float(value)
            if not math.isfinite(value) or not (SCORE_MIN <= value <= SCORE_MAX):
                raise RangeError(f"{aspect} score {value!r} outside [1.0, 4.0]")
            clean[aspect] = value
        self._values = MappingProxyType(clean)

    def __getitem__(self, aspect: str) -> float:
        return self._values[aspect]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self._values.items())
        return f"AspectScores({inner})"

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._values.items())))

    def __eq__(self, other) -> bool:
        if isinstance(other, Mapping):
            return dict(self._values) == dict(other)
        return NotImplemented


@dataclass(frozen=True)
class StoryPair:
    pair_id: str
    story_a_id: str
    story_b_id: str
    gold: AspectScores = field(default_factory=AspectScores)
    full_a: Optional[str] = None
    full_b: Optional[str] = None
    summary_a: Optional[str] = None
    summary_b: Optional[str] = None
    split: Optional[str] = None
    language: str = "en"
    theme: Optional[str] = None
    reason: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.gold, AspectScores):
            object.__setattr__(self, "gold", AspectScores(self.gold))
        has_a = bool(self.full_a or self.summary_a)
        has_b = bool(self.full_b or self.summary_b)
        if has_a != has_b:
            raise SchemaError(
                f"pair {self.pair_id!r}: story text present for only one side; "
                "give text for both stories or for neither"
            )

    @property
    def metadata_only(self) -> bool:
        return not (self.full_a or self.summary_a)


class PairSet(_Validated):
    """Immutable collection of story pairs keyed by ``pair_id``."""

    def __init__(self, pairs: Iterable[StoryPair] = (), errors: Iterable[RowError] = ()):
        self._pairs = tuple(pairs)
        index: dict[str, StoryPair] = {}
        for p in self._pairs:
            if p.pair_id in index:
                raise DuplicateError(f"duplicate pair_id {p.pair_id!r}")
            index[p.pair_id] = p
        self._index = MappingProxyType(index)
        self.errors = tuple(errors)

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self) -> Iterator[StoryPair]:
        return iter(self._pairs)

    def __getitem__(self, pair_id: str) -> StoryPair:
        return self._index[pair_id]

    def __contains__(self, pair_id: object) -> bool:
        return pair_id in self._index

    def get(self, pair_id: str) -> Optional[StoryPair]:
        return self._index.get(pair_id)

    @property
    def splits(self) -> dict[Optional[str], int]:
        out: dict[Optional[str], int] = {}
        for p in self._pairs:
            out[p.split] = out.get(p.split, 0) + 1
        return out

    def select(self, split: Optional[str] = None) -> "PairSet":
        """Pairs tagged with ``split`` (all pairs when ``split`` is None)."""
        if split is None:
            return self
        return PairSet(p for p in self._pairs if p.split == split)

    def __repr__(self) -> str:
        return f"PairSet(n={len(self)}, errors={len(self.errors)})"


# ---------------------------------------------------------------------------
# annotations

AnnotationValue = Union[float, str]


@dataclass(frozen=True)
class AnnotationRecord:
    annotator_id: str
    pair_id: str
    aspect: str
    setting: str
    value: AnnotationValue

    def __post_init__(self):
        if self.aspect not in ASPECTS:
            raise SchemaError(f"unknown aspect {self.aspect!r}")
        if self.setting not in SETTINGS:
            raise SchemaError(f"unknown setting {self.setting!r}")
        if self.setting == "discrete":
            if not isinstance(self.value, str):
                raise ValueTypeError(
                    f"discrete setting expects a class label V/M/N, got {self.value!r}")
            if self.value not in VMN_LABELS:
                raise SchemaError(f"unknown class label {self.value!r}; expected V, M or N")
        else:
            if isinstance(self.value, str) or isinstance(self.value, bool):
                raise ValueTypeError(
                    f"{self.setting} setting expects a real score, got {self.value!r}")
            value = float(self.value)
            if not math.isfinite(value) or not (SCORE_MIN <= value <= SCORE_MAX):
                raise RangeError(f"annotation value {value!r} outside [1.0, 4.0]")
            object.__setattr__(self, "value", value)

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.annotator_id, self.pair_id, self.aspect, self.setting)


class AnnotationSet(_Validated):
    """Annotator ratings; missing (annotator, pair) cells are allowed."""

    def __init__(self, records: Iterable[AnnotationRecord] = (),
                 errors: Iterable[RowError] = ()):
        self.records = tuple(records)
        seen = set()
        for r in self.records:
            if r.key in seen:
                raise DuplicateError(f"duplicate annotation {r.key!r}")
            seen.add(r.key)
        self.errors = tuple(errors)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def roster(self) -> tuple[str, ...]:
        return tuple(sorted({r.annotator_id for r in self.records}))

    @property
    def aspects(self) -> tuple[str, ...]:
        present = {r.aspect for r in self.records}
        return tuple(a for a in ASPECTS if a in present)

    @property
    def settings(self) -> tuple[str, ...]:
        present = {r.setting for r in self.records}
        return tuple(s for s in SETTINGS if s in present)

    def ratings(self, aspect: str, setting: str,
                annotators: Optional[Iterable[str]] = None) -> dict[str, dict]:
        """``{annotator: {item: value}}`` for one aspect and setting.

        Items are pair ids, except under ``combined`` where summary and
        full ratings are concatenated and items become
        ``(setting, pair_id)`` tuples.
        """
        if setting not in SETTINGS:
            raise SchemaError(f"unknown setting {setting!r}")
        wanted = None if annotators is None else set(annotators)
        out: dict[str, dict] = {}
        for r in self.records:
            if r.aspect != aspect or (wanted is not None and r.annotator_id not in wanted):
                continue
            if setting == "combined":
                if r.setting not in CONTINUOUS_SETTINGS:
                    continue
                item = (r.setting, r.pair_id)
            elif r.setting == setting:
                item = r.pair_id
            else:
                continue
            out.setdefault(r.annotator_id, {})[item] = r.value
        return {a: out[a] for a in sorted(out)}

    def has(self, aspect: str, setting: str) -> bool:
        return bool(self.ratings(aspect, setting))

    def __repr__(self) -> str:
        return f"AnnotationSet(n={len(self)}, annotators={len(self.roster)})"


# ---------------------------------------------------------------------------
# predictions


def check_probs(probs: Iterable[float]) -> tuple[float, ...]:
    """Validate a 4-class probability vector, renormalizing within 1e-6."""
    vec = tuple(float(p) for p in probs)
    if len(vec) != len(CLASSES):
        raise ShapeError(f"probs must have {len(CLASSES)} components, got {len(vec)}")
    if not all(math.isfinite(p) for p in vec):
        raise NonFiniteError(f"probs contain non-finite values: {vec}")
    if any(p < 0 for p in vec):
        raise NormalizationError(f"probs contain negative components: {vec}")
    total = math.fsum(vec)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise NormalizationError(f"probs sum to {total!r}, not 1")
    if total != 1.0:
        vec = tuple(p / total for p in vec)
    return vec


@dataclass(frozen=True)
class PredictionRecord:
    pair_id: str
    aspect: str
    variant: str
    score: float
    probs: Optional[tuple[float, ...]] = None
    source: str = ""

    def __post_init__(self):
        if not self.pair_id:
            raise SchemaError("prediction without pair_id")
        if self.aspect not in ASPECTS:
            raise SchemaError(f"unknown aspect {self.aspect!r}")
        if self.variant not in VARIANTS:
            raise SchemaError(f"unknown variant {self.variant!r}")
        score = float(self.score)
        if not math.isfinite(score):
            raise NonFiniteError(f"non-finite score {self.score!r}")
        object.__setattr__(self, "score", score)
        if self.probs is not None:
            object.__setattr__(self, "probs", check_probs(self.probs))

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.pair_id, self.aspect, self.variant, self.source)


class PredictionSet(_Validated):
    def __init__(self, records: Iterable[PredictionRecord] = (),
                 errors: Iterable[RowError] = (), warnings: Iterable[str] = ()):
        self.records = tuple(records)
        seen = set()
        for r in self.records:
            if r.key in seen:
                raise DuplicateError(f"duplicate prediction {r.key!r}")
            seen.add(r.key)
        self.errors = tuple(errors)
        self.warnings = tuple(warnings)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)

    def for_aspect(self, aspect: str) -> list[PredictionRecord]:
        return [r for r in self.records if r.aspect == aspect]

    def __repr__(self) -> str:
        return f"PredictionSet(n={len(self)}, errors={len(self.errors)})"


# ---------------------------------------------------------------------------
# embeddings


@dataclass(frozen=True)
class EmbeddingVector:
    story_id: str
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ShapeError(f"embedding {self.story_id!r} must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"embedding {self.story_id!r} has non-finite components")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


class EmbeddingSet(_Validated):
    """Story embeddings sharing one dimension."""

    def __init__(self, vectors: Iterable[EmbeddingVector] = (), dim: Optional[int] = None,
                 errors: Iterable[RowError] = ()):
        self._vectors: dict[str, EmbeddingVector] = {}
        for v in vectors:
            if dim is None:
                dim = v.dim
            elif v.dim != dim:
                raise DimensionError(f"embedding {v.story_id!r} has dim {v.dim}, expected {dim}")
            if v.story_id in self._vectors:
                raise DuplicateError(f"duplicate story_id {v.story_id!r}")
            self._vectors[v.story_id] = v
        if dim is not None and dim <= 0:
            raise DimensionError("dim must be positive")
        self.dim = dim
        self.errors = tuple(errors)

    def __len__(self) -> int:
        return len(self._vectors)

    def __iter__(self) -> Iterator[EmbeddingVector]:
        return iter(self._vectors.values())

    def __contains__(self, story_id: object) -> bool:
        return story_id in self._vectors

    def __getitem__(self, story_id: str) -> np.ndarray:
        try:
            return self._vectors[story_id].values
        except KeyError:
            raise MissingEmbeddingError(story_id) from None

    def vector(self, story_id: str) -> EmbeddingVector:
        try:
            return self._vectors[story_id]
        except KeyError:
            raise MissingEmbeddingError(story_id) from None

    @property
    def story_ids(self) -> tuple[str, ...]:
        return tuple(self._vectors)

    def __repr__(self) -> str:
        return f"EmbeddingSet(dim={self.dim}, n={len(self)})"


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class Histogram:
    counts: dict[float, int]
    other: int = 0

    @property
    def flagged(self) -> bool:
        return self.other > 0

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.other

    def to_dict(self) -> dict:
        return {
            "buckets": [{"gold": g, "count": c} for g, c in self.counts.items()],
            "other": self.other,
            "total": self.total,
        }


def aspect_values(pairs: Iterable[StoryPair], aspect: str) -> list[float]:
    values = []
    for p in pairs:
        if aspect not in p.gold:
            raise SchemaError(f"pair {p.pair_id!r} has no {aspect} score")
        values.append(p.gold[aspect])
    return values


def label_histogram(pairs: PairSet, aspect: str, split: Optional[str] = None) -> Histogram:
    """Count gold ``aspect`` scores per 0.5 bucket; off-grid values go to ``other``."""
    counts = {g: 0 for g in GRID}
    other = 0
    for value in aspect_values(pairs.select(split), aspect):
        if on_grid(value):
            counts[value] += 1
        else:
            other += 1
    return Histogram(counts, other)


def require_nonzero(vec: np.ndarray, what: str) -> float:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DomainError(f"zero vector for {what}")
    return norm
