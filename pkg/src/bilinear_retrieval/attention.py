"""Channel-wise co-attention over two feature branches.

Both branches are summarized by global average pooling; in joint mode the
concatenated summary drives two small MLPs that emit per-channel weights
for each branch, so each branch's gating sees the other branch. The
separate mode (ablation) feeds each MLP only its own branch's summary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError

WEIGHT_MODES = ("sigmoid", "softmax")
GUIDANCE_MODES = ("joint", "separate")


@dataclass
class CoAttentionParams:
    """Two 2-layer MLPs producing channel weights alpha_a (C_a,) and
    alpha_l (C_l,). Weight matrices map from the guidance vector (length
    C_a + C_l in joint mode, own-branch length in separate mode) down to
    k_a/k_l and back up to the branch channel count."""

    w1_a: np.ndarray
    b1_a: np.ndarray
    w2_a: np.ndarray
    b2_a: np.ndarray
    w1_l: np.ndarray
    b1_l: np.ndarray
    w2_l: np.ndarray
    b2_l: np.ndarray
    weight_mode: str = "sigmoid"
    guidance_mode: str = "joint"

    def __post_init__(self):
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.guidance_mode not in GUIDANCE_MODES:
            raise ConfigError(f"guidance_mode must be one of {GUIDANCE_MODES}")

    @property
    def channels_a(self) -> int:
        return self.w2_a.shape[0]

    @property
    def channels_l(self) -> int:
        return self.w2_l.shape[0]


def default_bottleneck(c_a: int, c_l: int) -> int:
    """Reduction size for the attention MLPs: 1/16 of the joint width."""
    return max(1, math.ceil((c_a + c_l) / 16))


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_co_attention(
    c_a: int,
    c_l: int,
    k_a: int | None = None,
    k_l: int | None = None,
    weight_mode: str = "sigmoid",
    guidance_mode: str = "joint",
    seed: int = 0,
) -> CoAttentionParams:
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), biases zero."""
    if c_a < 1 or c_l < 1:
        raise ConfigError("channel counts must be >= 1")
    k_a = k_a or default_bottleneck(c_a, c_l)
    k_l = k_l or default_bottleneck(c_a, c_l)
    if k_a < 1 or k_l < 1:
        raise ConfigError("bottleneck sizes must be >= 1")
    guide_a = c_a + c_l if guidance_mode == "joint" else c_a
    guide_l = c_a + c_l if guidance_mode == "joint" else c_l
    rng = np.random.default_rng(seed)
    return CoAttentionParams(
        w1_a=uniform_init(rng, (k_a, guide_a), guide_a),
        b1_a=np.zeros(k_a),
        w2_a=uniform_init(rng, (c_a, k_a), k_a),
        b2_a=np.zeros(c_a),
        w1_l=uniform_init(rng, (k_l, guide_l), guide_l),
        b1_l=np.zeros(k_l),
        w2_l=uniform_init(rng, (c_l, k_l), k_l),
        b2_l=np.zeros(c_l),
        weight_mode=weight_mode,
        guidance_mode=guidance_mode,
    )


def _weight_nonlinearity(x: ad.Var, mode: str) -> ad.Var:
    return ad.sigmoid(x) if mode == "sigmoid" else ad.softmax_last(x)


def co_attention_graph(va, vl, params: CoAttentionParams, mlp_vars: dict | None = None):
    """Differentiable weight computation on (C, H, W) feature maps.

    mlp_vars optionally supplies already-lifted parameter Vars (training
    path); otherwise the stored arrays are used as constants.
    """
    va, vl = ad.lift(va), ad.lift(vl)
    if va.value.ndim != 3 or vl.value.ndim != 3:
        raise ShapeError("co-attention expects (C, H, W) feature maps")
    if va.value.shape[0] != params.channels_a or vl.value.shape[0] != params.channels_l:
        raise ShapeError(
            f"channel mismatch: maps {va.value.shape[0]}/{vl.value.shape[0]} vs "
            f"params {params.channels_a}/{params.channels_l}"
        )
    p = mlp_vars if mlp_vars is not None else {
        name: getattr(params, name)
        for name in ("w1_a", "b1_a", "w2_a", "b2_a", "w1_l", "b1_l", "w2_l", "b2_l")
    }
    ga = ad.global_avg_pool(va)
    gl = ad.global_avg_pool(vl)
    if params.guidance_mode == "joint":
        guide_a = guide_l = ad.concat_vec([ga, gl])
    else:
        guide_a, guide_l = ga, gl
    ha = ad.relu(ad.linear(p["w1_a"], p["b1_a"], guide_a))
    alpha_a = _weight_nonlinearity(ad.linear(p["w2_a"], p["b2_a"], ha), params.weight_mode)
    hl = ad.relu(ad.linear(p["w1_l"], p["b1_l"], guide_l))
    alpha_l = _weight_nonlinearity(ad.linear(p["w2_l"], p["b2_l"], hl), params.weight_mode)
    return alpha_a, alpha_l


def co_attention_weights(va, vl, params: CoAttentionParams):
    """Channel weights (alpha_a, alpha_l) as plain arrays."""
    alpha_a, alpha_l = co_attention_graph(va, vl, params)
    return alpha_a.value, alpha_l.value


def apply_channel_weights(v, alpha) -> np.ndarray:
    """Scale each channel of v (C, H, W) by alpha (C,)."""
    return ad.channel_scale(v, alpha).value
