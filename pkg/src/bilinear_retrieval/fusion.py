"""Spatial fusion of two weighted feature maps into one global vector.

The main path applies compact bilinear pooling to the per-location fiber
pair of the two maps; concatenation, elementwise product/sum (through a
learned channel adapter) and the explicit full outer product exist as
selectable alternatives. The fused map is finalized by global average
pooling, signed square root, l2 normalization and one linear layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import sketch as sk
from . import tensor_ops as T
from .errors import ConfigError, ShapeError

FUSION_MODES = ("cbp", "concat", "mul", "sum", "full_bilinear")

# full outer products get large quickly; keep desk-scale memory bounded
MAX_FULL_BILINEAR = 65536


@dataclass(frozen=True)
class FusionConfig:
    sketch_dim: int = 256
    target_spatial: tuple[int, int] = (8, 8)  # (H, W)
    fusion_mode: str = "cbp"
    out_dim: int = 64
    eps: float = 1e-12
    per_location_sketch: bool = False

    def __post_init__(self):
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.sketch_dim < 1 or self.out_dim < 1:
            raise ConfigError("sketch_dim and out_dim must be >= 1")
        if min(self.target_spatial) < 1:
            raise ConfigError("target spatial extents must be >= 1")


def _check_spatial_pair(va, vl):
    if va.ndim != 3 or vl.ndim != 3:
        raise ShapeError("fusion expects (C, H, W) maps")
    if va.shape[1:] != vl.shape[1:]:
        raise ShapeError(f"spatial mismatch: {va.shape[1:]} vs {vl.shape[1:]}")


def spatial_cbp_graph(va_t, vl_t, params1: sk.SketchParams, params2: sk.SketchParams) -> ad.Var:
    """Differentiable per-location compact bilinear pooling.

    All H*W locations are sketched and convolved in one batched FFT pass;
    the result fiber at (i, j) equals cbp_vector of the two input fibers.
    """
    va_t, vl_t = ad.lift(va_t), ad.lift(vl_t)
    va, vl = va_t.value, vl_t.value
    _check_spatial_pair(va, vl)
    if params1.dim_out != params2.dim_out:
        raise ShapeError("sketch output dims differ")
    if va.shape[0] != params1.dim_in or vl.shape[0] != params2.dim_in:
        raise ShapeError(
            f"channel counts {va.shape[0]}/{vl.shape[0]} do not match sketches "
            f"{params1.dim_in}/{params2.dim_in}"
        )
    d = params1.dim_out
    _, H, W = va.shape
    y1 = sk.project_columns(va.reshape(va.shape[0], -1), params1)
    y2 = sk.project_columns(vl.reshape(vl.shape[0], -1), params2)
    f1 = np.fft.rfft(y1, axis=0)
    f2 = np.fft.rfft(y2, axis=0)
    out = np.fft.irfft(f1 * f2, n=d, axis=0)

    def vjp(up):
        fu = np.fft.rfft(up.reshape(d, -1), axis=0)
        gy1 = np.fft.irfft(fu * np.conj(f2), n=d, axis=0)
        gy2 = np.fft.irfft(fu * np.conj(f1), n=d, axis=0)
        g1 = sk.project_adjoint(gy1, params1).reshape(va.shape)
        g2 = sk.project_adjoint(gy2, params2).reshape(vl.shape)
        return g1, g2

    return ad.Var(out.reshape(d, H, W), (va_t, vl_t), vjp)


def spatial_cbp(va_t, vl_t, params1: sk.SketchParams, params2: sk.SketchParams) -> np.ndarray:
    """Fuse two aligned maps into a (d, H, W) bilinear map."""
    return spatial_cbp_graph(va_t, vl_t, params1, params2).value


def make_per_location_sketches(
    c1: int, c2: int, d: int, height: int, width: int, seed: int
) -> list[tuple[sk.SketchParams, sk.SketchParams]]:
    """Independent sketch pairs per spatial location, seeded deterministically."""
    pairs = []
    for idx in range(height * width):
        pairs.append(
            (
                sk.make_sketch_params(c1, d, seed * 1_000_003 + 2 * idx),
                sk.make_sketch_params(c2, d, seed * 1_000_003 + 2 * idx + 1),
            )
        )
    return pairs


def spatial_cbp_per_location(va_t, vl_t, param_pairs) -> np.ndarray:
    """Variant drawing a fresh sketch pair per location (comparison mode)."""
    va = T.as_tensor(va_t, "va_t")
    vl = T.as_tensor(vl_t, "vl_t")
    _check_spatial_pair(va, vl)
    _, H, W = va.shape
    if len(param_pairs) != H * W:
        raise ShapeError(f"need {H * W} sketch pairs, got {len(param_pairs)}")
    d = param_pairs[0][0].dim_out
    out = np.zeros((d, H, W), dtype=va.dtype)
    for i in range(H):
        for j in range(W):
            p1, p2 = param_pairs[i * W + j]
            out[:, i, j] = sk.cbp_vector(va[:, i, j], vl[:, i, j], p1, p2)
    return out


def spatial_cbp_per_location_graph(va_t, vl_t, param_pairs) -> ad.Var:
    """Differentiable per-location variant (one sketch pair per fiber)."""
    va_t, vl_t = ad.lift(va_t), ad.lift(vl_t)
    _check_spatial_pair(va_t.value, vl_t.value)
    _, H, W = va_t.value.shape
    if len(param_pairs) != H * W:
        raise ShapeError(f"need {H * W} sketch pairs, got {len(param_pairs)}")
    fibers = []
    for i in range(H):
        for j in range(W):
            p1, p2 = param_pairs[i * W + j]
            fibers.append(
                sk.cbp_vector_graph(ad.fiber(va_t, i, j), ad.fiber(vl_t, i, j), p1, p2)
            )
    return ad.stack_spatial(fibers, H, W)


def channel_adapter_graph(vl_t, weight, bias) -> ad.Var:
    """1x1 linear map over channels: (C_out, C_in) applied at each location."""
    vl_t, weight = ad.lift(vl_t), ad.lift(weight)
    vl, Wv = vl_t.value, weight.value
    if vl.ndim != 3 or Wv.ndim != 2 or Wv.shape[1] != vl.shape[0]:
        raise ShapeError(f"adapter shapes incompatible: {Wv.shape} on {vl.shape}")
    _, H, W = vl.shape
    flat = vl.reshape(vl.shape[0], -1)
    out = Wv @ flat
    parents = [weight, vl_t]
    if bias is not None:
        bias = ad.lift(bias)
        out = out + bias.value[:, None]
        parents.insert(1, bias)

    def vjp(up):
        u = up.reshape(out.shape[0], -1)
        gw = u @ flat.T
        gx = (Wv.T @ u).reshape(vl.shape)
        if bias is None:
            return gw, gx
        return gw, u.sum(axis=1), gx

    return ad.Var(out.reshape(Wv.shape[0], H, W), tuple(parents), vjp)


def fuse_alternative_graph(va_t, vl_t, config: FusionConfig, adapter=None) -> ad.Var:
    """Non-bilinear fusion modes: concat, mul, sum, full_bilinear.

    mul/sum require matching channel counts, either directly or through an
    adapter (weight, bias) mapping landmark channels onto attribute ones.
    """
    va_t, vl_t = ad.lift(va_t), ad.lift(vl_t)
    va, vl = va_t.value, vl_t.value
    _check_spatial_pair(va, vl)
    mode = config.fusion_mode
    if mode == "concat":
        return ad.concat_channels(va_t, vl_t)
    if mode in ("mul", "sum"):
        rhs = vl_t
        if adapter is not None:
            rhs = channel_adapter_graph(vl_t, adapter[0], adapter[1])
        if rhs.value.shape[0] != va.shape[0]:
            raise ConfigError(
                f"{mode} fusion requires equal channels; got {va.shape[0]} vs "
                f"{rhs.value.shape[0]} (supply an adapter)"
            )
        return ad.mul(va_t, rhs) if mode == "mul" else ad.add(va_t, rhs)
    if mode == "full_bilinear":
        ca, cl = va.shape[0], vl.shape[0]
        if ca * cl > MAX_FULL_BILINEAR:
            raise ConfigError(
                f"full_bilinear needs {ca}*{cl} channels > {MAX_FULL_BILINEAR}"
            )
        _, H, W = va.shape
        out = np.einsum("ihw,jhw->ijhw", va, vl).reshape(ca * cl, H, W)

        def vjp(up):
            u = up.reshape(ca, cl, H, W)
            return np.einsum("ijhw,jhw->ihw", u, vl), np.einsum("ijhw,ihw->jhw", u, va)

        return ad.Var(out, (va_t, vl_t), vjp)
    raise ConfigError(f"fuse_alternative cannot handle mode {mode!r}")


def fuse_alternative(va_t, vl_t, config: FusionConfig, adapter=None) -> np.ndarray:
    return fuse_alternative_graph(va_t, vl_t, config, adapter).value


def finalize_graph(fused, fc_weight, fc_bias, eps: float = 1e-12) -> ad.Var:
    """Global average pool, signed sqrt, l2 normalization, then one FC layer.

    The intermediate just before the FC has unit norm (for inputs above the
    eps guard), making the embedding invariant to positive rescaling of the
    fused map.
    """
    pooled = ad.global_avg_pool(ad.lift(fused))
    normed = ad.l2_normalize(ad.signed_sqrt(pooled), eps)
    return ad.linear(fc_weight, fc_bias, normed)


def finalize_representation(fused, fc_weight, fc_bias, eps: float = 1e-12) -> np.ndarray:
    return finalize_graph(fused, fc_weight, fc_bias, eps).value


def finalize_pre_fc(fused, eps: float = 1e-12) -> np.ndarray:
    """The unit-norm intermediate of the finalization chain (diagnostics)."""
    return T.l2_normalize(T.signed_sqrt(T.global_avg_pool(T.as_tensor(fused, "fused"))), eps)
