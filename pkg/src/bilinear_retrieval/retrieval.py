"""Gallery ranking and evaluation metrics: top-k retrieval accuracy,
landmark localization error, and per-attribute average precision."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

DEFAULT_KS = (1, 10, 20, 30, 40, 50)


@dataclass
class Gallery:
    """Embedded reference set: one row and one item id per image.

    render_ids optionally identify the physical image so a query can be
    prevented from matching itself when both sets share renders.
    """

    embeddings: np.ndarray
    item_ids: list
    render_ids: list | None = None

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise ShapeError("gallery embeddings must be a non-empty (G, D) matrix")
        if not np.isfinite(self.embeddings).all():
            raise ValueError("gallery embeddings contain non-finite values")
        if len(self.item_ids) != self.embeddings.shape[0]:
            raise ShapeError("item_ids length != number of embeddings")
        if self.render_ids is not None and len(self.render_ids) != len(self.item_ids):
            raise ShapeError("render_ids length != number of embeddings")

    def __len__(self) -> int:
        return self.embeddings.shape[0]


def rank_queries(
    queries: np.ndarray,
    gallery: Gallery,
    query_render_ids: list | None = None,
    exclude_self: bool = True,
) -> np.ndarray:
    """Full ascending sort of gallery indices by Euclidean distance.

    Ties keep gallery order (stable sort). When exclude_self is set and
    render ids are available on both sides, a gallery entry that is the
    query's own render is pushed to the end of its list.
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != gallery.embeddings.shape[1]:
        raise ShapeError(
            f"queries {queries.shape} incompatible with gallery "
            f"{gallery.embeddings.shape}"
        )
    q2 = (queries * queries).sum(axis=1)[:, None]
    g2 = (gallery.embeddings * gallery.embeddings).sum(axis=1)[None, :]
    d2 = np.maximum(q2 + g2 - 2.0 * queries @ gallery.embeddings.T, 0.0)
    if exclude_self and query_render_ids is not None and gallery.render_ids is not None:
        gallery_render = np.asarray(gallery.render_ids, dtype=object)
        for qi, rid in enumerate(query_render_ids):
            d2[qi, gallery_render == rid] = np.inf
    return np.argsort(d2, axis=1, kind="stable")


def first_match_ranks(ranked: np.ndarray, query_ids: list, gallery_ids: list) -> np.ndarray:
    """1-based rank of the first gallery entry sharing the query's item id;
    0 marks queries whose id never appears in the gallery."""
    gallery_ids = np.asarray(gallery_ids, dtype=object)
    ranks = np.zeros(len(query_ids), dtype=np.int64)
    for qi, qid in enumerate(query_ids):
        hits = np.flatnonzero(gallery_ids[ranked[qi]] == qid)
        if hits.size:
            ranks[qi] = hits[0] + 1
    return ranks


def topk_accuracy(
    ranked: np.ndarray,
    query_ids: list,
    gallery_ids: list,
    ks=DEFAULT_KS,
) -> dict[int, float]:
    """Fraction of queries whose item id occurs within the top k results.

    Queries without any gallery match are excluded from the denominator
    (with a warning) rather than silently counted as misses.
    """
    ranks = first_match_ranks(ranked, query_ids, gallery_ids)
    matched = ranks > 0
    unmatched = int((~matched).sum())
    if unmatched:
        warnings.warn(f"{unmatched} query id(s) absent from gallery; excluded")
    if not matched.any():
        return {int(k): 0.0 for k in ks}
    good = ranks[matched]
    return {int(k): float((good <= k).mean()) for k in ks}


def landmark_nme(pred_heatmaps: list, targets: list) -> list[float | None]:
    """Per-landmark localization error, averaged over visible samples.

    The prediction is the argmax cell of each heatmap (row-major first on
    ties); error is the Euclidean distance to the ground-truth coordinate
    divided by the heatmap width. Landmarks never visible come back None.
    """
    if len(pred_heatmaps) != len(targets):
        raise ShapeError("prediction and target counts differ")
    if not targets:
        return []
    m = targets[0].num_landmarks
    totals = np.zeros(m)
    counts = np.zeros(m)
    for pred, target in zip(pred_heatmaps, targets):
        pred = np.asarray(pred)
        if pred.shape != target.heatmaps.shape:
            raise ShapeError(
                f"heatmap shape {pred.shape} != target {target.heatmaps.shape}"
            )
        width = pred.shape[2]
        for lm in range(m):
            if not target.visibility[lm]:
                continue
            flat = int(np.argmax(pred[lm]))
            row, col = divmod(flat, width)
            err = float(np.hypot(row - target.coords[lm, 0], col - target.coords[lm, 1]))
            totals[lm] += err / width
            counts[lm] += 1
    return [
        (float(totals[lm] / counts[lm]) if counts[lm] else None) for lm in range(m)
    ]


def attribute_average_precision(
    scores: np.ndarray, targets: np.ndarray
) -> tuple[list[float | None], float | None]:
    """AP per attribute (mean precision at each positive's rank) and their
    mean over attributes that have at least one positive."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    if scores.shape != targets.shape or scores.ndim != 2:
        raise ShapeError("scores and targets must be matching (Q, N) matrices")
    aps: list[float | None] = []
    for col in range(scores.shape[1]):
        y = targets[:, col]
        npos = int(y.sum())
        if npos == 0:
            aps.append(None)
            continue
        order = np.argsort(-scores[:, col], kind="stable")
        hits = y[order] == 1
        cum = np.cumsum(hits)
        precision_at_hits = cum[hits] / (np.flatnonzero(hits) + 1)
        aps.append(float(precision_at_hits.mean()))
    included = [a for a in aps if a is not None]
    return aps, (float(np.mean(included)) if included else None)


@dataclass
class RetrievalReport:
    acc_at_k: dict[int, float]
    per_query_ranks: list[int]
    nme: list[float | None]
    attribute_ap: list[float | None]
    map: float | None
    config_hash: str
    seed: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "acc_at_k": {str(k): v for k, v in sorted(self.acc_at_k.items())},
            "per_query_ranks": self.per_query_ranks,
            "nme": self.nme,
            "attribute_ap": self.attribute_ap,
            "map": self.map,
            "config_hash": self.config_hash,
            "seed": self.seed,
        }
        payload.update(self.extra)
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @staticmethod
    def from_json(text: str) -> "RetrievalReport":
        d = json.loads(text)
        known = {"acc_at_k", "per_query_ranks", "nme", "attribute_ap", "map", "config_hash", "seed"}
        return RetrievalReport(
            acc_at_k={int(k): v for k, v in d["acc_at_k"].items()},
            per_query_ranks=d["per_query_ranks"],
            nme=d["nme"],
            attribute_ap=d["attribute_ap"],
            map=d["map"],
            config_hash=d["config_hash"],
            seed=d["seed"],
            extra={k: v for k, v in d.items() if k not in known},
        )
