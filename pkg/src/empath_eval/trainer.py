"""Linear projection head trained over frozen story embeddings.

Plain mini-batch gradient descent on one of the contrastive losses.
Given the same embeddings, pairs and config, training is fully
deterministic.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from . import metrics
from .core import ASPECTS, EmbeddingSet, EmbeddingVector, PairSet, RowError, bin_label
from .errors import (
    DivergenceError,
    InsufficientDataError,
    RangeError,
    SchemaError,
    ShapeError,
    ValidationError,
)
from .losses import LOSS_KINDS, LossConfig, PairBatch, get_loss


@dataclass(frozen=True)
class ProjectionHead:
    W: np.ndarray

    def __post_init__(self):
        w = np.array(self.W, dtype=np.float64)
        if w.ndim != 2 or 0 in w.shape:
            raise ShapeError(f"projection matrix must be 2-d and non-empty, got shape {w.shape}")
        if w.shape[0] > w.shape[1]:
            raise ShapeError(f"out_dim {w.shape[0]} exceeds in_dim {w.shape[1]}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("projection matrix has non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "W", w)

    @property
    def out_dim(self) -> int:
        return int(self.W.shape[0])

    @property
    def in_dim(self) -> int:
        return int(self.W.shape[1])

    @classmethod
    def identity(cls, dim: int) -> "ProjectionHead":
        return cls(np.eye(dim))


def apply_head(head: ProjectionHead, e: Union[EmbeddingVector, np.ndarray, Sequence[float]]) -> np.ndarray:
    x = e.values if isinstance(e, EmbeddingVector) else np.asarray(e, dtype=np.float64)
    if x.shape[-1] != head.in_dim:
        raise ShapeError(f"embedding dim {x.shape[-1]} does not match head in_dim {head.in_dim}")
    return x @ head.W.T


def make_pair_labels(pairs: PairSet, aspect: str,
                     threshold: float = 2.5) -> tuple[dict[str, int], list[RowError]]:
    """Positive (1) iff gold > threshold. Pairs without the aspect go to the error list."""
    labels: dict[str, int] = {}
    errors: list[RowError] = []
    for i, p in enumerate(pairs, start=1):
        if aspect not in p.gold:
            errors.append(RowError(i, "schema", f"pair {p.pair_id!r} has no {aspect} score"))
            continue
        labels[p.pair_id] = bin_label(p.gold[aspect], threshold)
    return labels, errors


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "cosine_mse"
    learning_rate: float = 1e-2
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    out_dim: Optional[int] = None
    early_stop: Optional[int] = None
    loss: LossConfig = field(default_factory=LossConfig)
    train_split: str = "train"
    dev_split: str = "dev"

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise SchemaError(f"unknown loss {self.loss_kind!r}; expected one of {LOSS_KINDS}")
        if not self.learning_rate >= 0:
            raise RangeError("learning_rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise RangeError("epochs and batch_size must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise RangeError("seed must be an unsigned 64-bit integer")
        if self.out_dim is not None and self.out_dim < 1:
            raise RangeError("out_dim must be positive")
        if self.early_stop is not None and self.early_stop < 1:
            raise RangeError("early_stop patience must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    dev_spearman: float
    dev_pearson: float


@dataclass(frozen=True)
class TrainHistory:
    epochs: tuple[EpochRecord, ...]
    head: ProjectionHead
    seed: int
    initial_dev_spearman: float
    initial_dev_pearson: float
    best_epoch: int
    config: TrainConfig
    train_aspect: str = "empathy"
    eval_aspect: str = "empathy"

    @property
    def dev_spearman(self) -> list[float]:
        return [e.dev_spearman for e in self.epochs]

    @property
    def best_dev_spearman(self) -> float:
        return max((e.dev_spearman for e in self.epochs), default=math.nan)

    def to_dict(self) -> dict:
        def num(v):
            return None if math.isnan(v) else v
        return {
            "seed": self.seed,
            "train_aspect": self.train_aspect,
            "eval_aspect": self.eval_aspect,
            "config": self.config.to_dict(),
            "initial": {"dev_spearman": num(self.initial_dev_spearman),
                        "dev_pearson": num(self.initial_dev_pearson)},
            "epoch": [e.epoch for e in self.epochs],
            "train_loss": [num(e.train_loss) for e in self.epochs],
            "dev_spearman": [num(e.dev_spearman) for e in self.epochs],
            "dev_pearson": [num(e.dev_pearson) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "out_dim": self.head.out_dim,
            "in_dim": self.head.in_dim,
            "W": self.head.W.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHistory":
        def num(v):
            return math.nan if v is None else float(v)
        cfg = dict(d["config"])
        cfg["loss"] = LossConfig(**cfg["loss"])
        epochs = tuple(
            EpochRecord(int(e), num(tl), num(sp), num(pe))
            for e, tl, sp, pe in zip(d["epoch"], d["train_loss"], d["dev_spearman"], d["dev_pearson"])
        )
        return cls(
            epochs=epochs,
            head=head_from_dict(d),
            seed=int(d["seed"]),
            initial_dev_spearman=num(d["initial"]["dev_spearman"]),
            initial_dev_pearson=num(d["initial"]["dev_pearson"]),
            best_epoch=int(d["best_epoch"]),
            config=TrainConfig(**cfg),
            train_aspect=d.get("train_aspect", "empathy"),
            eval_aspect=d.get("eval_aspect", "empathy"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def head_from_dict(d: dict) -> ProjectionHead:
    """Rebuild a head from a serialized TrainHistory (flattened row-major W)."""
    try:
        out_dim, in_dim = int(d["out_dim"]), int(d["in_dim"])
        flat = np.asarray(d["W"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"not a serialized projection head: {exc}") from None
    if flat.size != out_dim * in_dim:
        raise ShapeError(f"W has {flat.size} entries, expected {out_dim}x{in_dim}")
    return ProjectionHead(flat.reshape(out_dim, in_dim))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PairMatrix:
    ids: tuple[str, ...]
    a: np.ndarray
    b: np.ndarray
    labels: np.ndarray


def _gather(embeddings: EmbeddingSet, pairs: Sequence, aspect: str) -> _PairMatrix:
    rows = sorted((p for p in pairs if aspect in p.gold), key=lambda p: p.pair_id)
    dim = embeddings.dim or 0
    a = np.array([embeddings[p.story_a_id] for p in rows]).reshape(len(rows), dim)
    b = np.array([embeddings[p.story_b_id] for p in rows]).reshape(len(rows), dim)
    labels = np.array([p.gold[aspect] for p in rows], dtype=np.float64)
    return _PairMatrix(tuple(p.pair_id for p in rows), a, b, labels)


def _dev_metrics(W: np.ndarray, dev: _PairMatrix) -> tuple[float, float]:
    pa = dev.a @ W.T
    pb = dev.b @ W.T
    na = np.linalg.norm(pa, axis=1)
    nb = np.linalg.norm(pb, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        bad = dev.ids[int(np.argmin(np.minimum(na, nb)))]
        raise ValidationError(f"projected embedding is zero for dev pair {bad!r}")
    cos = np.einsum("ij,ij->i", pa, pb) / (na * nb)
    return metrics.spearman(cos, dev.labels), metrics.pearson(cos, dev.labels)


def init_head(in_dim: int, out_dim: int, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / math.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def train_projection(embeddings: EmbeddingSet, pairs: PairSet, train_aspect: str,
                     eval_aspect: str = "empathy",
                     config: Optional[TrainConfig] = None) -> TrainHistory:
    """Fit a projection head on the train split, tracking dev correlations.

    Training labels come from ``train_aspect`` and dev correlations are
    measured against ``eval_aspect``. With ``early_stop`` set, training
    halts after that many epochs without a dev Spearman improvement and
    the best head is returned; otherwise the final head is returned.
    """
    config = config or TrainConfig()
    for aspect in (train_aspect, eval_aspect):
        if aspect not in ASPECTS:
            raise SchemaError(f"unknown aspect {aspect!r}")
    if embeddings.dim is None:
        raise InsufficientDataError("no embeddings given")
    train = _gather(embeddings, pairs.select(config.train_split), train_aspect)
    dev = _gather(embeddings, pairs.select(config.dev_split), eval_aspect)
    if len(train.ids) == 0:
        raise InsufficientDataError(f"no {config.train_split!r} pairs with {train_aspect} gold")
    if len(dev.ids) < 2:
        raise InsufficientDataError(f"need at least 2 {config.dev_split!r} pairs with {eval_aspect} gold")

    in_dim = embeddings.dim
    out_dim = config.out_dim or in_dim
    if out_dim > in_dim:
        raise ShapeError(f"out_dim {out_dim} exceeds embedding dim {in_dim}")
    rng = np.random.default_rng(config.seed)
    W = init_head(in_dim, out_dim, rng)
    loss_fn = get_loss(config.loss_kind)
    binary = (train.labels > config.loss.threshold).astype(np.float64)

    init_sp, init_pe = _dev_metrics(W, dev)
    records: list[EpochRecord] = []
    best_sp, best_epoch, best_W = init_sp, 0, W.copy()
    stale = 0
    n = len(train.ids)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xa, xb = train.a[idx], train.b[idx]
            batch = PairBatch(xa @ W.T, xb @ W.T, train.labels[idx], binary[idx])
            res = loss_fn(batch, config.loss)
            if not math.isfinite(res.value):
                raise DivergenceError(epoch, res.value)
            losses.append(res.value * len(idx))
            grad_W = res.grad_u.T @ xa + res.grad_v.T @ xb
            if config.learning_rate:
                W = W - config.learning_rate * grad_W
        if not np.all(np.isfinite(W)):
            raise DivergenceError(epoch, math.nan)
        sp, pe = _dev_metrics(W, dev)
        records.append(EpochRecord(epoch, math.fsum(losses) / n, sp, pe))
        if sp > best_sp or (best_epoch == 0 and math.isnan(best_sp) and not math.isnan(sp)):
            best_sp, best_epoch, best_W = sp, epoch, W.copy()
            stale = 0
        else:
            stale += 1
        if config.early_stop is not None and stale >= config.early_stop:
            break

    final_W = best_W if config.early_stop is not None else W
    return TrainHistory(
        epochs=tuple(records),
        head=ProjectionHead(final_W),
        seed=config.seed,
        initial_dev_spearman=init_sp,
        initial_dev_pearson=init_pe,
        best_epoch=best_epoch,
        config=config,
        train_aspect=train_aspect,
        eval_aspect=eval_aspect,
    )
