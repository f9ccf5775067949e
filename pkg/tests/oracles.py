"""Brute-force reference implementations used as test oracles.

Pure Python, written straight from the textbook definitions and sharing
no code with the package.
"""

from __future__ import annotations

import math
from itertools import combinations


def pearson(xs, ys):
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return math.nan
    return sxy / math.sqrt(sxx) / math.sqrt(syy)


def average_ranks(xs):
    # rank = 1 + (#strictly smaller) + (#ties - 1) / 2
    out = []
    for x in xs:
        less = sum(1 for y in xs if y < x)
        equal = sum(1 for y in xs if y == x)
        out.append(less + (equal + 1) / 2.0)
    return out


def spearman(xs, ys):
    return pearson(average_ranks(xs), average_ranks(ys))


def classification(pred, gold, labels=(0, 1)):
    n = len(gold)
    acc = sum(p == g for p, g in zip(pred, gold)) / n
    precs, recs, f1s, supports = [], [], [], []
    for c in labels:
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp = sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn = sum(1 for p, g in zip(pred, gold) if p != c and g == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
        supports.append(tp + fn)
    k = len(labels)
    return {
        "acc": acc,
        "prec": sum(precs) / k,
        "recall": sum(recs) / k,
        "f1_macro": sum(f1s) / k,
        "f1_weighted": sum(f * s for f, s in zip(f1s, supports)) / n,
    }


def kappa(a, b):
    n = len(a)
    cats = set(a) | set(b)
    po = sum(x == y for x, y in zip(a, b)) / n
    pe = sum((a.count(c) / n) * (b.count(c) / n) for c in cats)
    if pe == 1:
        return math.nan
    return (po - pe) / (1 - pe)


def _ordinal_delta(values_all):
    """Standard ordinal metric: (sum_{g=c..k} n_g - (n_c + n_k)/2)^2 over sorted values."""
    distinct = sorted(set(values_all))
    counts = {v: values_all.count(v) for v in distinct}

    def delta(c, k):
        lo, hi = min(c, k), max(c, k)
        s = sum(counts[g] for g in distinct if lo <= g <= hi)
        return (s - (counts[lo] + counts[hi]) / 2.0) ** 2
    return delta


def alpha(units, level="interval"):
    """Krippendorff's alpha in its pairwise-disagreement form.

    D_o averages delta over ordered value pairs inside each item, weighted
    1/(m_u - 1); D_e averages delta over all ordered pairs of pooled values.
    """
    units = [list(u) for u in units if len(u) >= 2]
    pooled = [v for u in units for v in u]
    n = len(pooled)
    if level == "nominal":
        def delta(c, k):
            return 0.0 if c == k else 1.0
    elif level == "interval":
        def delta(c, k):
            return float(c - k) ** 2
    else:
        delta = _ordinal_delta(pooled)
    d_o = 0.0
    for u in units:
        m = len(u)
        d_o += sum(delta(u[i], u[j]) for i in range(m) for j in range(m) if i != j) / (m - 1)
    d_o /= n
    d_e = sum(delta(pooled[i], pooled[j]) for i in range(n) for j in range(n) if i != j)
    d_e /= n * (n - 1)
    if d_e == 0:
        return math.nan
    return 1.0 - d_o / d_e


def mean_pairwise(ratings, fn):
    """Average ``fn`` over annotator pairs, each on the items they share."""
    vals = []
    for a, b in combinations(sorted(ratings), 2):
        shared = sorted(set(ratings[a]) & set(ratings[b]))
        if len(shared) < 2:
            continue
        v = fn([ratings[a][i] for i in shared], [ratings[b][i] for i in shared])
        if not math.isnan(v):
            vals.append(v)
    return sum(vals) / len(vals)
