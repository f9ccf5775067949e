"""Fixture builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from empath_eval.core import (
    AnnotationRecord,
    AnnotationSet,
    EmbeddingSet,
    EmbeddingVector,
    PairSet,
    PredictionRecord,
    PredictionSet,
    StoryPair,
)
from empath_eval.losses import PairBatch, angle_parts

P_Y = (0.140, 0.399, 0.404, 0.057)

# filled by the acceptance tests, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def make_pairs(golds, aspect="empathy", split=None, prefix="p") -> PairSet:
    return PairSet(StoryPair(f"{prefix}{i:04d}", f"{prefix}{i:04d}a", f"{prefix}{i:04d}b",
                             {aspect: g}, split=split)
                   for i, g in enumerate(golds))


def make_preds(scores, aspect="empathy", variant="standard", prefix="p", probs=None) -> PredictionSet:
    return PredictionSet(
        PredictionRecord(f"{prefix}{i:04d}", aspect, variant, s,
                         None if probs is None else probs[i])
        for i, s in enumerate(scores))


def make_annotations(table, aspect="empathy", setting="summary") -> AnnotationSet:
    """``table`` maps annotator -> list of values (None = missing) over items i0, i1, ..."""
    return AnnotationSet(
        AnnotationRecord(a, f"i{k}", aspect, setting, v)
        for a, values in table.items() for k, v in enumerate(values) if v is not None)


def random_embeddings(ids, dim, seed=0) -> EmbeddingSet:
    rng = np.random.default_rng(seed)
    return EmbeddingSet(EmbeddingVector(i, rng.normal(size=dim)) for i in ids)


KINK_GAP = 1e-3


def random_batch(kind: str, rng: np.random.Generator, n: int = 6, dim: int = 8,
                 margin: float = 0.5) -> PairBatch:
    """Random batch with every row kept away from the loss's non-smooth points.

    Contrastive negatives avoid ``1 - cos == margin``; angle rows avoid
    zero real or imaginary parts. Offending rows are redrawn.
    """
    u = rng.normal(size=(n, dim))
    v = rng.normal(size=(n, dim))
    labels = rng.choice(np.arange(1.0, 4.01, 0.5), size=n)
    while True:
        bad = np.zeros(n, dtype=bool)
        if kind == "contrastive":
            cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            bad = (labels <= 2.5) & (np.abs(1.0 - cos - margin) < KINK_GAP)
        elif kind == "angle":
            re, im = angle_parts(u, v)
            bad = (np.abs(re) < KINK_GAP) | (np.abs(im) < KINK_GAP)
        if not bad.any():
            return PairBatch(u, v, labels)
        u[bad] = rng.normal(size=(int(bad.sum()), dim))
        v[bad] = rng.normal(size=(int(bad.sum()), dim))
