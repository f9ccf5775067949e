"""Turn embeddings or paired model outputs into 1-4 scale predictions."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ASPECTS, EmbeddingSet, EvalConfig, PairSet, PredictionRecord, PredictionSet
from .errors import DomainError, InsufficientDataError, SchemaError, ShapeError
from .trainer import ProjectionHead

SWAP_MODES = ("standard", "reverse", "mean")


@dataclass(frozen=True)
class ScoredPair:
    pair_id: str
    aspect: str
    raw: float
    scaled: float
    variant_used: str = "standard"


def score_pairs(embeddings: EmbeddingSet, pairs: PairSet, head: Optional[ProjectionHead] = None,
                config: Optional[EvalConfig] = None,
                aspects: Sequence[str] = ASPECTS) -> list[ScoredPair]:
    """Cosine of the (optionally projected) story embeddings, times ``scale_factor``.

    The scaled value is not clamped into [1, 4] unless
    ``config.clamp_scaled`` is set, so negative cosines stay negative.
    """
    config = config or EvalConfig()
    for a in aspects:
        if a not in ASPECTS:
            raise SchemaError(f"unknown aspect {a!r}")
    if head is not None and embeddings.dim is not None and head.in_dim != embeddings.dim:
        raise ShapeError(f"head in_dim {head.in_dim} does not match embedding dim {embeddings.dim}")
    out = []
    for pair in sorted(pairs, key=lambda p: p.pair_id):
        u = embeddings[pair.story_a_id]
        v = embeddings[pair.story_b_id]
        if head is not None:
            u = head.W @ u
            v = head.W @ v
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        if nu == 0.0 or nv == 0.0:
            raise DomainError(f"zero {'projected ' if head is not None else ''}vector for pair {pair.pair_id!r}")
        raw = min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))
        scaled = raw * config.scale_factor
        if config.clamp_scaled:
            scaled = min(4.0, max(1.0, scaled))
        for aspect in aspects:
            out.append(ScoredPair(pair.pair_id, aspect, raw, scaled))
    return out


def cosine_score_pairs(embeddings: EmbeddingSet, pairs: PairSet,
                       head: Optional[ProjectionHead] = None,
                       config: Optional[EvalConfig] = None,
                       aspects: Sequence[str] = ASPECTS, source: str = "") -> PredictionSet:
    scored = score_pairs(embeddings, pairs, head, config, aspects)
    src = source or ("cosine+head" if head is not None else "cosine")
    return PredictionSet(
        PredictionRecord(s.pair_id, s.aspect, "standard", s.scaled, source=src) for s in scored
    )


def swap_aggregate(preds: PredictionSet, mode: str = "mean") -> PredictionSet:
    """Select one swap variant, or average the standard and reverse scores.

    Mean mode groups records by (pair_id, aspect, source). Groups lacking
    either variant are dropped with a warning. Probability vectors are
    not carried onto averaged records.
    """
    if mode not in SWAP_MODES:
        raise SchemaError(f"unknown swap mode {mode!r}; expected one of {SWAP_MODES}")
    if mode != "mean":
        kept = sorted((r for r in preds if r.variant == mode), key=_order)
        return PredictionSet(kept, warnings=preds.warnings)
    groups: dict[tuple[str, str, str], dict[str, PredictionRecord]] = {}
    for r in preds:
        if r.variant in ("standard", "reverse"):
            groups.setdefault((r.pair_id, r.aspect, r.source), {})[r.variant] = r
    out, warnings = [], list(preds.warnings)
    for key in sorted(groups):
        g = groups[key]
        if len(g) < 2:
            missing = "reverse" if "standard" in g else "standard"
            warnings.append(f"pair {key[0]!r} ({key[1]}) lacks a {missing} prediction; "
                            "dropped from mean")
            continue
        score = (g["standard"].score + g["reverse"].score) / 2.0
        out.append(PredictionRecord(key[0], key[1], "mean", score, source=key[2]))
    if not out:
        raise InsufficientDataError("no pair has both standard and reverse predictions")
    return PredictionSet(out, warnings=warnings)


def _order(r: PredictionRecord) -> tuple:
    return (r.pair_id, r.aspect, r.source)


def relabel_variants(preds: Iterable[PredictionRecord]) -> PredictionSet:
    """Exchange the standard and reverse labels (used to check symmetry)."""
    flip = {"standard": "reverse", "reverse": "standard"}
    return PredictionSet(
        PredictionRecord(r.pair_id, r.aspect, flip.get(r.variant, r.variant), r.score,
                         r.probs, r.source)
        for r in preds
    )
