"""Synthetic fixtures: histogram-shaped pair sets and a recoverable training task."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Optional

import numpy as np

from .core import ASPECTS, EmbeddingSet, EmbeddingVector, PairSet, StoryPair

# EmpathicStories empathy-label counts per 0.5 bucket (train/dev/test).
CANONICAL_COUNTS = {
    "train": {1.0: 85, 1.5: 125, 2.0: 310, 2.5: 288, 3.0: 344, 3.5: 262, 4.0: 86},
    "dev": {1.0: 2, 1.5: 16, 2.0: 24, 2.5: 20, 3.0: 21, 3.5: 15, 4.0: 2},
    "test": {1.0: 15, 1.5: 29, 2.0: 75, 2.5: 76, 3.0: 103, 3.5: 84, 4.0: 18},
}


def pairs_from_histogram(counts: Mapping[float, int], split: Optional[str] = None,
                         aspect: str = "empathy", prefix: str = "",
                         seed: Optional[int] = None) -> list[StoryPair]:
    """Metadata-only pairs whose ``aspect`` scores follow ``counts``.

    With a ``seed`` the scores are shuffled across pair ids.
    """
    scores = [float(g) for g, c in sorted(counts.items()) for _ in range(c)]
    if seed is not None:
        np.random.default_rng(seed).shuffle(scores)
    tag = prefix or (split or "pair")
    return [
        StoryPair(f"{tag}-{i:05d}", f"{tag}-{i:05d}-a", f"{tag}-{i:05d}-b",
                  {aspect: s}, split=split)
        for i, s in enumerate(scores)
    ]


def canonical_pairs(splits: Sequence[str] = ("train", "dev", "test"),
                    seed: Optional[int] = 0) -> PairSet:
    pairs: list[StoryPair] = []
    for k, split in enumerate(splits):
        pairs.extend(pairs_from_histogram(CANONICAL_COUNTS[split], split,
                                          seed=None if seed is None else seed + k))
    return PairSet(pairs)


def recoverable_task(seed: int = 7, n_train: int = 500, n_dev: int = 100,
                     in_dim: int = 24, hidden_dim: int = 4,
                     nuisance_scale: float = 1.0) -> tuple[EmbeddingSet, PairSet]:
    """Embedding pairs whose gold comes from the cosine of a hidden projection.

    The first ``hidden_dim`` coordinates carry the signal: their cosine
    ``c`` between the two stories of a pair is drawn uniformly from
    [0, 1], and gold = 1 + 3 * c for every aspect. The remaining
    coordinates are nuisance with a pair correlation drawn independently
    of gold, so the cosine of the raw (or randomly projected) vectors is
    nearly uninformative. A head that keeps only the signal coordinates
    recovers gold exactly.
    """
    rng = np.random.default_rng(seed)
    k, m = hidden_dim, in_dim - hidden_dim
    vectors: list[EmbeddingVector] = []
    pairs: list[StoryPair] = []
    for i in range(n_train + n_dev):
        target = rng.uniform(0.0, 1.0)
        su = rng.normal(size=k)
        uh = su / np.linalg.norm(su)
        ortho = rng.normal(size=k)
        ortho -= (ortho @ uh) * uh
        ortho /= np.linalg.norm(ortho)
        sv = (target * uh + np.sqrt(1.0 - target ** 2) * ortho) * np.linalg.norm(rng.normal(size=k))
        tau = rng.uniform(0.0, 1.0)
        nu = nuisance_scale * rng.normal(size=m)
        nv = tau * nu + np.sqrt(1.0 - tau ** 2) * nuisance_scale * rng.normal(size=m)
        cos = float(su @ sv / (np.linalg.norm(su) * np.linalg.norm(sv)))
        gold = 1.0 + 3.0 * min(1.0, max(0.0, cos))
        a_id, b_id = f"s{i:04d}a", f"s{i:04d}b"
        vectors.append(EmbeddingVector(a_id, np.concatenate([su, nu])))
        vectors.append(EmbeddingVector(b_id, np.concatenate([sv, nv])))
        pairs.append(StoryPair(f"p{i:04d}", a_id, b_id, {a: gold for a in ASPECTS},
                               split="train" if i < n_train else "dev"))
    return EmbeddingSet(vectors), PairSet(pairs)
