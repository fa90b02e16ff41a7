"""Independent brute-force reference implementations used by the tests.

Everything here is written from the mathematical definition, deliberately
ignoring how the package computes the same quantity, so the two routes
check each other.
"""

import math

import numpy as np


def naive_dft(v):
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        for t in range(n):
            out[k] += v[t] * np.exp(-2j * math.pi * k * t / n)
    return out


def naive_idft(c):
    c = np.asarray(c, dtype=np.complex128)
    n = c.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    for t in range(n):
        for k in range(n):
            out[t] += c[k] * np.exp(2j * math.pi * k * t / n)
    return out / n


def naive_circular_convolve(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a.shape[0]
    out = np.zeros(d)
    for k in range(d):
        for t in range(d):
            out[k] += a[t] * b[(k - t) % d]
    return out


def numeric_grad(f, x, h=1e-6):
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.copy().ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(flat.reshape(x.shape))
        flat[i] = orig - h
        fm = f(flat.reshape(x.shape))
        flat[i] = orig
        g.ravel()[i] = (fp - fm) / (2 * h)
    return g


def brute_force_rank(queries, gallery):
    """Per-query gallery order by Euclidean distance, ties by index."""
    ranked = []
    for q in queries:
        dists = [(float(np.linalg.norm(q - g)), gi) for gi, g in enumerate(gallery)]
        ranked.append([gi for _, gi in sorted(dists, key=lambda t: (t[0], t[1]))])
    return np.asarray(ranked)


def brute_force_topk(queries, gallery, query_ids, gallery_ids, ks):
    """Top-k accuracy recomputed with explicit loops."""
    ranked = brute_force_rank(queries, gallery)
    out = {}
    for k in ks:
        hits = 0
        for qi, qid in enumerate(query_ids):
            top = [gallery_ids[gi] for gi in ranked[qi][:k]]
            if qid in top:
                hits += 1
        out[k] = hits / len(query_ids)
    return out


def brute_force_average_precision(scores, labels):
    """AP for one attribute column: mean precision at each positive, with
    ranking ties broken by sample index (stable descending sort)."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    precisions = []
    seen_pos = 0
    for rank, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            seen_pos += 1
            precisions.append(seen_pos / rank)
    if not precisions:
        return None
    return sum(precisions) / len(precisions)
