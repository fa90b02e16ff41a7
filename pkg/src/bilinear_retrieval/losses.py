"""Training objectives: multi-label attribute BCE, visibility-masked
landmark heatmap regression, and instance-ID cross entropy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import tensor_ops as T
from .errors import ShapeError

SCORE_CLAMP = 1e-7


@dataclass(frozen=True)
class AttributeTarget:
    """Binary presence vector over the attribute vocabulary."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ShapeError("attribute labels must be a vector")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("attribute labels must be 0/1")
        object.__setattr__(self, "labels", labels.astype(np.float64))


@dataclass(frozen=True)
class LandmarkTarget:
    """Per-landmark ground truth: heatmaps, visibility mask, and the peak
    coordinates (row, col) in heatmap cells used for localization error."""

    heatmaps: np.ndarray
    visibility: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        hm = T.as_tensor(self.heatmaps, "heatmaps")
        vis = np.asarray(self.visibility)
        coords = np.asarray(self.coords, dtype=np.float64)
        if hm.ndim != 3:
            raise ShapeError("heatmaps must be (M, H, W)")
        m = hm.shape[0]
        if vis.shape != (m,) or not np.isin(vis, (0, 1)).all():
            raise ValueError("visibility must be a 0/1 vector of length M")
        if coords.shape != (m, 2):
            raise ShapeError("coords must be (M, 2) rows of (row, col)")
        if hm.size and hm.min() < 0:
            raise ValueError("ground-truth heatmaps must be non-negative")
        object.__setattr__(self, "heatmaps", hm)
        object.__setattr__(self, "visibility", vis.astype(np.float64))
        object.__setattr__(self, "coords", coords)

    @property
    def num_landmarks(self) -> int:
        return self.heatmaps.shape[0]


@dataclass(frozen=True)
class IdTarget:
    """Ground-truth class index for instance-ID classification."""

    class_index: int
    num_classes: int

    def __post_init__(self):
        if not 0 <= self.class_index < self.num_classes:
            raise ValueError(
                f"class index {self.class_index} outside [0, {self.num_classes})"
            )


@dataclass
class LossDiagnostics:
    """Counters for numerically degenerate inputs seen by the losses."""

    clamped_scores: int = 0
    zero_norm_landmarks: int = 0

    def merge(self, other: "LossDiagnostics") -> None:
        self.clamped_scores += other.clamped_scores
        self.zero_norm_landmarks += other.zero_norm_landmarks


def attribute_bce_graph(scores, target: AttributeTarget, diagnostics: LossDiagnostics | None = None) -> ad.Var:
    """Mean binary cross entropy over attributes.

    Scores are expected in (0, 1); values at the boundaries are clamped to
    [1e-7, 1 - 1e-7] (gradient zero there) and counted in diagnostics.
    """
    scores = ad.lift(scores)
    x = scores.value
    y = target.labels
    if x.shape != y.shape:
        raise ShapeError(f"scores shape {x.shape} != labels shape {y.shape}")
    xc = np.clip(x, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    if diagnostics is not None:
        diagnostics.clamped_scores += int((xc != x).sum())
    n = x.shape[0]
    val = float(np.mean(-(y * np.log(xc) + (1.0 - y) * np.log1p(-xc))))
    active = (xc == x).astype(x.dtype)

    def vjp(up):
        return (up * active * (xc - y) / (xc * (1.0 - xc)) / n,)

    return ad.Var(np.asarray(val), (scores,), vjp)


def attribute_bce_loss(scores, target: AttributeTarget, diagnostics: LossDiagnostics | None = None) -> float:
    return float(attribute_bce_graph(scores, target, diagnostics).value)


def landmark_graph(pred_heatmaps, target: LandmarkTarget, diagnostics: LossDiagnostics | None = None) -> ad.Var:
    """Sum over visible landmarks of the Frobenius distance between the
    predicted and ground-truth heatmaps."""
    pred = ad.lift(pred_heatmaps)
    x = pred.value
    if x.shape != target.heatmaps.shape:
        raise ShapeError(
            f"prediction shape {x.shape} != target shape {target.heatmaps.shape}"
        )
    diff = x - target.heatmaps
    norms = np.sqrt((diff * diff).sum(axis=(1, 2)))
    vis = target.visibility
    if diagnostics is not None:
        diagnostics.zero_norm_landmarks += int(((norms == 0) & (vis > 0)).sum())
    val = float((vis * norms).sum())
    # subgradient 0 where a visible landmark matches exactly (norm 0)
    safe = np.where(norms > 0, norms, 1.0)
    scale = np.where(norms > 0, vis / safe, 0.0)

    def vjp(up):
        return (up * diff * scale[:, None, None],)

    return ad.Var(np.asarray(val), (pred,), vjp)


def landmark_loss(pred_heatmaps, target: LandmarkTarget, diagnostics: LossDiagnostics | None = None) -> float:
    return float(landmark_graph(pred_heatmaps, target, diagnostics).value)


def id_cross_entropy_graph(logits, target: IdTarget) -> ad.Var:
    """Numerically stable -log softmax[gt] via the log-sum-exp shift."""
    logits = ad.lift(logits)
    x = logits.value
    if x.ndim != 1 or x.shape[0] != target.num_classes:
        raise ShapeError(f"logits shape {x.shape} != ({target.num_classes},)")
    gt = target.class_index
    m = x.max()
    lse = m + np.log(np.exp(x - m).sum())
    val = float(lse - x[gt])
    soft = np.exp(x - lse)

    def vjp(up):
        g = up * soft
        g = g.copy()
        g[gt] -= up
        return (g,)

    return ad.Var(np.asarray(val), (logits,), vjp)


def id_cross_entropy(logits, target: IdTarget) -> float:
    return float(id_cross_entropy_graph(logits, target).value)


def make_landmark_target(
    landmarks_px,
    image_size: int,
    heatmap_size: int,
    num_landmarks: int,
    sigma: float = 1.0,
) -> LandmarkTarget:
    """Build heatmap targets from (row, col, visible) image-pixel triples.

    Visible landmarks become unit-height Gaussians (sigma in heatmap cells)
    centered at the scaled coordinate; invisible ones get all-zero maps.
    """
    hm = np.zeros((num_landmarks, heatmap_size, heatmap_size))
    vis = np.zeros(num_landmarks)
    coords = np.zeros((num_landmarks, 2))
    rows = np.arange(heatmap_size)[:, None]
    cols = np.arange(heatmap_size)[None, :]
    scale = heatmap_size / image_size
    for m, (r_px, c_px, v) in enumerate(landmarks_px[:num_landmarks]):
        r, c = r_px * scale, c_px * scale
        coords[m] = (r, c)
        if not v:
            continue
        vis[m] = 1.0
        hm[m] = np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2.0 * sigma**2))
    return LandmarkTarget(hm, vis, coords)
