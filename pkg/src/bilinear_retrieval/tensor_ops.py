"""Dense-tensor primitives: pooling, resampling, spectral, linear and
normalization operations.

Tensors are plain numpy arrays in row-major (C) order, float64 by default
(float32 supported, with correspondingly looser accuracy). All operations
are pure: inputs are never mutated and results are freshly allocated, so
values may be shared freely between workers. Non-finite inputs are
rejected rather than propagated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def as_tensor(x, name: str = "tensor") -> np.ndarray:
    """Coerce to a float ndarray and reject NaN/Inf entries."""
    arr = np.asarray(x)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} produced non-finite values")
    return arr


@dataclass(frozen=True)
class ComplexVector:
    """Frequency-domain value: separate real and imaginary arrays."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = as_tensor(self.re, "re")
        im = as_tensor(self.im, "im")
        if re.ndim != 1 or im.ndim != 1 or re.shape != im.shape:
            raise ShapeError("re and im must be 1-D arrays of equal length")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def __len__(self) -> int:
        return self.re.shape[0]

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


def avg_pool2d(x, window: tuple[int, int], stride: tuple[int, int] | None = None) -> np.ndarray:
    """Average pooling over the two trailing spatial axes of a (C, H, W) map.

    The window must tile the input exactly given the stride; partial windows
    are a ShapeError, never silently cropped.
    """
    x = as_tensor(x, "x")
    if x.ndim != 3:
        raise ShapeError(f"avg_pool2d expects (C, H, W), got shape {x.shape}")
    h, w = window
    sh, sw = stride if stride is not None else window
    _, H, W = x.shape
    if h < 1 or w < 1 or sh < 1 or sw < 1:
        raise ShapeError("window and stride extents must be >= 1")
    if h > H or w > W:
        raise ShapeError(f"window {window} larger than input {(H, W)}")
    if (H - h) % sh or (W - w) % sw:
        raise ShapeError(
            f"window {window} with stride {(sh, sw)} does not tile input {(H, W)}"
        )
    if (h, w) == (sh, sw):
        C = x.shape[0]
        out = x.reshape(C, H // h, h, W // w, w).mean(axis=(2, 4))
    else:
        win = np.lib.stride_tricks.sliding_window_view(x, (h, w), axis=(1, 2))
        out = win[:, ::sh, ::sw].mean(axis=(-2, -1))
    return np.ascontiguousarray(out)


def resample_spatial(x, target: tuple[int, int]) -> np.ndarray:
    """Resize a (C, H, W) map to (C, H', W').

    Shrinking uses exact average pooling (the target must divide the input);
    enlarging replicates cells (nearest neighbour). The two axes are handled
    independently, so a mixed shrink/enlarge is allowed. Target (1, 1) is
    global average pooling.
    """
    x = as_tensor(x, "x")
    if x.ndim != 3:
        raise ShapeError(f"resample_spatial expects (C, H, W), got shape {x.shape}")
    th, tw = target
    if th < 1 or tw < 1:
        raise ShapeError("target extents must be >= 1")
    C, H, W = x.shape
    out = x
    if th <= H:
        if H % th:
            raise ShapeError(f"downsample {H} -> {th} is not an integer factor")
        out = out.reshape(C, th, H // th, W).mean(axis=2)
    else:
        if th % H:
            raise ShapeError(f"upsample {H} -> {th} is not an integer factor")
        out = np.repeat(out, th // H, axis=1)
    if tw <= W:
        if W % tw:
            raise ShapeError(f"downsample {W} -> {tw} is not an integer factor")
        out = out.reshape(C, th, tw, W // tw).mean(axis=3)
    else:
        if tw % W:
            raise ShapeError(f"upsample {W} -> {tw} is not an integer factor")
        out = np.repeat(out, tw // W, axis=2)
    return np.ascontiguousarray(out)


def global_avg_pool(x) -> np.ndarray:
    """Mean over the spatial axes of a (C, H, W) map, returning (C,)."""
    x = as_tensor(x, "x")
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool expects (C, H, W), got shape {x.shape}")
    return x.mean(axis=(1, 2))


def dft(v) -> ComplexVector:
    """Discrete Fourier transform of a real vector, any length >= 1."""
    v = as_tensor(v, "v")
    if v.ndim != 1 or v.shape[0] < 1:
        raise ShapeError("dft expects a non-empty 1-D vector")
    f = np.fft.fft(v)
    _check_finite(f.real, "dft")
    return ComplexVector(np.ascontiguousarray(f.real), np.ascontiguousarray(f.imag))


def idft(cv: ComplexVector) -> np.ndarray:
    """Inverse DFT, returning the real part.

    For spectra of real signals (conjugate-symmetric) the imaginary residue
    is at rounding level; it is discarded here.
    """
    if not isinstance(cv, ComplexVector):
        raise TypeError("idft expects a ComplexVector")
    out = np.fft.ifft(cv.to_complex()).real
    return _check_finite(np.ascontiguousarray(out), "idft")


def circular_convolve(a, b) -> np.ndarray:
    """Cyclic convolution of two equal-length real vectors.

    out[k] = sum_t a[t] * b[(k - t) mod d]. Computed in the frequency
    domain; agrees with the direct O(d^2) sum to rounding error.
    """
    a = as_tensor(a, "a")
    b = as_tensor(b, "b")
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError("circular_convolve expects 1-D vectors")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    d = a.shape[0]
    out = np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n=d)
    return _check_finite(np.ascontiguousarray(out), "circular_convolve")


def circular_correlate(a, b) -> np.ndarray:
    """Cyclic cross-correlation: out[t] = sum_k a[k] * b[(k - t) mod d].

    This is the adjoint of circular convolution in its first argument.
    """
    a = as_tensor(a, "a")
    b = as_tensor(b, "b")
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ShapeError("circular_correlate expects equal-length 1-D vectors")
    d = a.shape[0]
    out = np.fft.irfft(np.fft.rfft(a) * np.conj(np.fft.rfft(b)), n=d)
    return _check_finite(np.ascontiguousarray(out), "circular_correlate")


def linear_apply(weight, bias, x) -> np.ndarray:
    """Affine map weight @ x + bias; bias may be None for a pure linear map."""
    weight = as_tensor(weight, "weight")
    x = as_tensor(x, "x")
    if weight.ndim != 2 or x.ndim != 1:
        raise ShapeError("linear_apply expects weight (out, in) and x (in,)")
    if weight.shape[1] != x.shape[0]:
        raise ShapeError(f"weight columns {weight.shape[1]} != x length {x.shape[0]}")
    out = weight @ x
    if bias is not None:
        bias = as_tensor(bias, "bias")
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"bias shape {bias.shape} != ({weight.shape[0]},)")
        out = out + bias
    return _check_finite(out, "linear_apply")


def activate(x, mode: str) -> np.ndarray:
    """Elementwise relu/sigmoid, or softmax over the last axis."""
    x = as_tensor(x, "x")
    if mode == "relu":
        return np.maximum(x, 0.0)
    if mode == "sigmoid":
        # piecewise form avoids overflow in exp for large |x|
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    if mode == "softmax":
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation mode {mode!r}")


def signed_sqrt(x) -> np.ndarray:
    """sign(x) * sqrt(|x|), elementwise."""
    x = as_tensor(x, "x")
    return np.sign(x) * np.sqrt(np.abs(x))


def l2_normalize(x, eps: float = 1e-12) -> np.ndarray:
    """Scale x to unit Euclidean norm; vectors shorter than eps are scaled
    by 1/eps instead of blowing up."""
    x = as_tensor(x, "x")
    norm = float(np.sqrt((x * x).sum()))
    return x / max(norm, eps)
