"""Contrastive loss family over paired embeddings, with analytic gradients.

Every loss takes a :class:`PairBatch` of aligned ``u``/``v`` rows and
returns the loss value together with its gradient with respect to both
matrices. :func:`finite_diff_grad` provides the numerical reference.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientDataError, RangeError, ShapeError

LOSS_KINDS = ("cosine_mse", "contrastive", "cosent", "angle")


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.5
    scale: float = 20.0
    threshold: float = 2.5

    def __post_init__(self):
        if not self.margin > 0:
            raise RangeError("margin must be positive")
        if not self.scale > 0:
            raise RangeError("scale must be positive")

    @staticmethod
    def label_norm(score):
        """Map the 1-4 gold scale onto [0, 1]."""
        return (np.asarray(score, dtype=np.float64) - 1.0) / 3.0


@dataclass(frozen=True)
class PairBatch:
    u: np.ndarray
    v: np.ndarray
    labels: np.ndarray
    binary_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.u, dtype=np.float64))
        v = np.atleast_2d(np.asarray(self.v, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if u.shape != v.shape:
            raise ShapeError(f"u and v shapes differ: {u.shape} vs {v.shape}")
        if labels.shape[0] != u.shape[0]:
            raise ShapeError(f"{labels.shape[0]} labels for {u.shape[0]} pairs")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "labels", labels)
        if self.binary_labels is not None:
            b = np.asarray(self.binary_labels, dtype=np.float64).reshape(-1)
            if b.shape != labels.shape:
                raise ShapeError("binary_labels must align with labels")
            if not np.all((b == 0) | (b == 1)):
                raise RangeError("binary_labels must be 0 or 1")
            object.__setattr__(self, "binary_labels", b)

    def __len__(self) -> int:
        return self.u.shape[0]

    def with_vectors(self, u: np.ndarray, v: np.ndarray) -> "PairBatch":
        return PairBatch(u, v, self.labels, self.binary_labels)


@dataclass(frozen=True)
class LossResult:
    value: float
    grad_u: np.ndarray
    grad_v: np.ndarray


# ---------------------------------------------------------------------------
# cosine


def cosine_sim(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine similarity undefined for a zero vector")
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


def _row_cosines(u: np.ndarray, v: np.ndarray):
    """Cosines per row plus the pieces needed for their gradients."""
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise DomainError("cosine similarity undefined for a zero vector")
    dots = np.einsum("ij,ij->i", u, v)
    cos = dots / (nu * nv)
    return cos, nu, nv


def _cosine_grads(u, v, cos, nu, nv, dl_dcos):
    """Chain ``dL/dcos`` through cos = u.v / (|u||v|)."""
    w = dl_dcos[:, None]
    gu = w * (v / (nu * nv)[:, None] - cos[:, None] * u / (nu ** 2)[:, None])
    gv = w * (u / (nu * nv)[:, None] - cos[:, None] * v / (nv ** 2)[:, None])
    return gu, gv


def cosine_sim_grad(u: Sequence[float], v: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`cosine_sim` with respect to ``u`` and ``v``."""
    u2 = np.atleast_2d(np.asarray(u, dtype=np.float64))
    v2 = np.atleast_2d(np.asarray(v, dtype=np.float64))
    cos, nu, nv = _row_cosines(u2, v2)
    gu, gv = _cosine_grads(u2, v2, cos, nu, nv, np.ones(1))
    return gu[0], gv[0]


def _require_items(batch: PairBatch, minimum: int = 1) -> None:
    if len(batch) < minimum:
        raise InsufficientDataError(f"batch needs at least {minimum} pair(s), got {len(batch)}")


# ---------------------------------------------------------------------------
# losses


def loss_cosine_mse(batch: PairBatch, config: LossConfig = LossConfig()) -> LossResult:
    _require_items(batch)
    cos, nu, nv = _row_cosines(batch.u, batch.v)
    diff = cos - config.label_norm(batch.labels)
    n = len(batch)
    value = float(np.dot(diff, diff)) / n
    gu, gv = _cosine_grads(batch.u, batch.v, cos, nu, nv, 2.0 * diff / n)
    return LossResult(value, gu, gv)


def binary_targets(batch: PairBatch, config: LossConfig) -> np.ndarray:
    if batch.binary_labels is not None:
        return batch.binary_labels
    return (batch.labels > config.threshold).astype(np.float64)


def loss_contrastive(batch: PairBatch, config: LossConfig = LossConfig()) -> LossResult:
    """Margin contrastive loss on the cosine distance ``d = 1 - cos``."""
    _require_items(batch)
    y = binary_targets(batch, config)
    cos, nu, nv = _row_cosines(batch.u, batch.v)
    d = 1.0 - cos
    hinge = np.maximum(0.0, config.margin - d)
    n = len(batch)
    value = float(np.sum(y * d ** 2 + (1.0 - y) * hinge ** 2)) / n
    # d/dcos of d^2 is -2d; of hinge^2 is +2 hinge (zero outside the margin)
    dl_dcos = (-2.0 * y * d + 2.0 * (1.0 - y) * hinge) / n
    gu, gv = _cosine_grads(batch.u, batch.v, cos, nu, nv, dl_dcos)
    return LossResult(value, gu, gv)


def _ranking_loss(scores: np.ndarray, labels: np.ndarray, scale: float):
    """``log(1 + sum exp(scale * (s_j - s_i)))`` over pairs with label_i > label_j.

    Returns the value and dL/dscores. Max-subtracted log-sum-exp.
    """
    ii, jj = np.nonzero(labels[:, None] > labels[None, :])
    if ii.size == 0:
        return 0.0, np.zeros_like(scores)
    z = scale * (scores[jj] - scores[ii])
    top = max(0.0, float(z.max()))
    ez = np.exp(z - top)
    denom = math.exp(-top) + float(ez.sum())
    value = top + math.log(denom)
    w = ez / denom
    grad = np.zeros_like(scores)
    np.add.at(grad, jj, scale * w)
    np.add.at(grad, ii, -scale * w)
    return value, grad


def loss_cosent(batch: PairBatch, config: LossConfig = LossConfig()) -> LossResult:
    if len(batch) == 0:
        return LossResult(0.0, batch.u.copy(), batch.v.copy())
    cos, nu, nv = _row_cosines(batch.u, batch.v)
    value, dl_dcos = _ranking_loss(cos, batch.labels, config.scale)
    gu, gv = _cosine_grads(batch.u, batch.v, cos, nu, nv, dl_dcos)
    return LossResult(value, gu, gv)


def angle_parts(u: np.ndarray, v: np.ndarray):
    """Complex-division components for rows of ``u`` against rows of ``v``.

    Each row is split into real and imaginary halves, ``u = a + bi`` and
    ``v = c + di``. Returns the summed real and imaginary parts of
    ``u / v`` rescaled by ``|v| / |u|``.
    """
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    dim = u.shape[1]
    if dim % 2:
        raise ShapeError(f"angle loss needs an even embedding dim, got {dim}")
    h = dim // 2
    a, b = u[:, :h], u[:, h:]
    c, d = v[:, :h], v[:, h:]
    zu = np.sum(a * a + b * b, axis=1)
    zv = np.sum(c * c + d * d, axis=1)
    if np.any(zu == 0.0) or np.any(zv == 0.0):
        raise DomainError("angle distance undefined for a zero vector")
    # (sum re) * |v|/|u| reduces to (a.c + b.d) / (|u||v|); likewise for im
    k = 1.0 / np.sqrt(zu * zv)
    re = np.sum(a * c + b * d, axis=1) * k
    im = np.sum(b * c - a * d, axis=1) * k
    return re, im


def angle_score(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    re, im = angle_parts(u, v)
    return np.abs(re) + np.abs(im)


def _angle_grads(u: np.ndarray, v: np.ndarray, dl_dg: np.ndarray):
    h = u.shape[1] // 2
    a, b = u[:, :h], u[:, h:]
    c, d = v[:, :h], v[:, h:]
    zu = np.sum(a * a + b * b, axis=1)[:, None]
    zv = np.sum(c * c + d * d, axis=1)[:, None]
    k = 1.0 / np.sqrt(zu * zv)
    p = np.sum(a * c + b * d, axis=1)[:, None]
    q = np.sum(b * c - a * d, axis=1)[:, None]
    re = p * k
    im = q * k
    w_re = dl_dg[:, None] * np.sign(re)
    w_im = dl_dg[:, None] * np.sign(im)
    # re = p*k, k = (zu zv)^-1/2; d k / d a = -k a / zu, d k / d c = -k c / zv
    ga = w_re * (c * k - re * a / zu) + w_im * (-d * k - im * a / zu)
    gb = w_re * (d * k - re * b / zu) + w_im * (c * k - im * b / zu)
    gc = w_re * (a * k - re * c / zv) + w_im * (b * k - im * c / zv)
    gd = w_re * (b * k - re * d / zv) + w_im * (-a * k - im * d / zv)
    return np.hstack([ga, gb]), np.hstack([gc, gd])


def loss_angle(batch: PairBatch, config: LossConfig = LossConfig()) -> LossResult:
    """Ranking loss over the complex-division angle score.

    Pairs with a higher gold label are pushed toward a larger
    ``|sum re| + |sum im|``, the same ordering CoSENT applies to cosines.
    """
    if batch.u.shape[1] % 2:
        raise ShapeError(f"angle loss needs an even embedding dim, got {batch.u.shape[1]}")
    if len(batch) == 0:
        return LossResult(0.0, batch.u.copy(), batch.v.copy())
    g = angle_score(batch.u, batch.v)
    value, dl_dg = _ranking_loss(g, batch.labels, config.scale)
    gu, gv = _angle_grads(batch.u, batch.v, dl_dg)
    return LossResult(value, gu, gv)


LOSSES: dict[str, Callable[[PairBatch, LossConfig], LossResult]] = {
    "cosine_mse": loss_cosine_mse,
    "contrastive": loss_contrastive,
    "cosent": loss_cosent,
    "angle": loss_angle,
}


def get_loss(kind: str) -> Callable[[PairBatch, LossConfig], LossResult]:
    try:
        return LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}; expected one of {LOSS_KINDS}") from None


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_grad(loss_fn: Callable[[PairBatch, LossConfig], LossResult], batch: PairBatch,
                     config: LossConfig = LossConfig(), h: float = 1e-5):
    """Central-difference gradient of ``loss_fn`` w.r.t. ``batch.u`` and ``batch.v``."""
    if not h > 0:
        raise RangeError("step h must be positive")
    grads = []
    for which in ("u", "v"):
        base = getattr(batch, which)
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus = base.copy()
            minus = base.copy()
            plus[idx] += h
            minus[idx] -= h
            if which == "u":
                fp = loss_fn(batch.with_vectors(plus, batch.v), config).value
                fm = loss_fn(batch.with_vectors(minus, batch.v), config).value
            else:
                fp = loss_fn(batch.with_vectors(batch.u, plus), config).value
                fm = loss_fn(batch.with_vectors(batch.u, minus), config).value
            g[idx] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads[0], grads[1]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """``|a - n| / max(|a|, |n|)``, 0 when both gradients are below ``floor``."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(a - n)) / scale


def grad_check(loss_fn, batch: PairBatch, config: LossConfig = LossConfig(),
               h: float = 1e-5) -> float:
    res = loss_fn(batch, config)
    nu, nv = finite_diff_grad(loss_fn, batch, config, h)
    return relative_error(np.concatenate([res.grad_u.ravel(), res.grad_v.ravel()]),
                          np.concatenate([nu.ravel(), nv.ravel()]))
