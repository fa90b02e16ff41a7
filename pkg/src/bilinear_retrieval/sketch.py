"""Count-sketch projection and compact bilinear pooling of vector pairs.

A sketch hashes each input coordinate to one of d buckets with a random
sign; the circular convolution of two sketches equals the sketch of the
outer product of the inputs under the combined hash. Both the fast
frequency-domain route and the explicit O(C1*C2) accumulation are provided
so each can check the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import tensor_ops as T
from .errors import ShapeError


@dataclass(frozen=True)
class SketchParams:
    """Fixed random hashing of C input coordinates into d buckets.

    signs holds +-1.0 per coordinate, buckets an index in [0, d). Both are
    fully determined by (C, d, seed), so serializing that triple suffices.
    """

    dim_in: int
    dim_out: int
    seed: int
    signs: np.ndarray = field(repr=False)
    buckets: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.signs.shape != (self.dim_in,) or self.buckets.shape != (self.dim_in,):
            raise ShapeError("signs/buckets must have length dim_in")
        if not np.all(np.abs(self.signs) == 1.0):
            raise ValueError("signs must be +-1")
        if self.buckets.min() < 0 or self.buckets.max() >= self.dim_out:
            raise ValueError("bucket indices out of range")


def make_sketch_params(c: int, d: int, seed: int) -> SketchParams:
    """Draw the (signs, buckets) pair from a seeded generator.

    Same (c, d, seed) always yields identical parameters.
    """
    if c < 1 or d < 1:
        raise ValueError(f"sketch dimensions must be >= 1, got C={c}, d={d}")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=c).astype(np.float64) * 2.0 - 1.0
    buckets = rng.integers(0, d, size=c)
    signs.flags.writeable = False
    buckets.flags.writeable = False
    return SketchParams(c, d, seed, signs, buckets)


def project(x, params: SketchParams) -> np.ndarray:
    """Count sketch: y[t] = sum of signs[l] * x[l] over l with buckets[l] = t."""
    x = T.as_tensor(x, "x")
    if x.ndim != 1 or x.shape[0] != params.dim_in:
        raise ShapeError(f"expected vector of length {params.dim_in}, got {x.shape}")
    y = np.zeros(params.dim_out, dtype=x.dtype)
    np.add.at(y, params.buckets, params.signs * x)
    return y


def project_columns(x_mat, params: SketchParams) -> np.ndarray:
    """Sketch every column of a (C, L) matrix at once, returning (d, L)."""
    x_mat = T.as_tensor(x_mat, "x_mat")
    if x_mat.ndim != 2 or x_mat.shape[0] != params.dim_in:
        raise ShapeError(f"expected (C={params.dim_in}, L) matrix, got {x_mat.shape}")
    y = np.zeros((params.dim_out, x_mat.shape[1]), dtype=x_mat.dtype)
    np.add.at(y, params.buckets, params.signs[:, None] * x_mat)
    return y


def project_adjoint(upstream, params: SketchParams) -> np.ndarray:
    """Transpose of the sketch map: pull a d-vector back to C coordinates."""
    upstream = T.as_tensor(upstream, "upstream")
    if upstream.shape[0] != params.dim_out:
        raise ShapeError(f"expected length {params.dim_out}, got {upstream.shape}")
    return params.signs * upstream[params.buckets] if upstream.ndim == 1 else (
        params.signs[:, None] * upstream[params.buckets]
    )


def cbp_vector(x1, x2, params1: SketchParams, params2: SketchParams) -> np.ndarray:
    """Compact bilinear pooling of two vectors: the circular convolution of
    their count sketches, approximating the sketched outer product."""
    if params1.dim_out != params2.dim_out:
        raise ShapeError(
            f"sketch output dims differ: {params1.dim_out} vs {params2.dim_out}"
        )
    return T.circular_convolve(project(x1, params1), project(x2, params2))


def outer_sketch_oracle(x1, x2, params1: SketchParams, params2: SketchParams) -> np.ndarray:
    """Ground truth for cbp_vector: explicitly form every product
    x1[i]*x2[j] and accumulate it, signed, into bucket (p1[i]+p2[j]) mod d."""
    x1 = T.as_tensor(x1, "x1")
    x2 = T.as_tensor(x2, "x2")
    if x1.ndim != 1 or x1.shape[0] != params1.dim_in:
        raise ShapeError(f"x1 must have length {params1.dim_in}")
    if x2.ndim != 1 or x2.shape[0] != params2.dim_in:
        raise ShapeError(f"x2 must have length {params2.dim_in}")
    if params1.dim_out != params2.dim_out:
        raise ShapeError("sketch output dims differ")
    d = params1.dim_out
    out = np.zeros(d, dtype=np.result_type(x1.dtype, x2.dtype))
    for i in range(x1.shape[0]):
        si, pi, xi = params1.signs[i], params1.buckets[i], x1[i]
        for j in range(x2.shape[0]):
            out[(pi + params2.buckets[j]) % d] += si * params2.signs[j] * xi * x2[j]
    return out


def cbp_gradient(upstream, x1, x2, params1: SketchParams, params2: SketchParams):
    """Cotangents of cbp_vector with respect to both inputs.

    With y_k the sketches, d(conv)/dy1 pulled back through the convolution
    is a circular correlation against y2, then through the sketch adjoint.
    """
    upstream = T.as_tensor(upstream, "upstream")
    if upstream.shape != (params1.dim_out,):
        raise ShapeError(f"upstream must have length {params1.dim_out}")
    y1 = project(x1, params1)
    y2 = project(x2, params2)
    grad_x1 = project_adjoint(T.circular_correlate(upstream, y2), params1)
    grad_x2 = project_adjoint(T.circular_correlate(upstream, y1), params2)
    return grad_x1, grad_x2


def cbp_vector_graph(x1, x2, params1: SketchParams, params2: SketchParams) -> ad.Var:
    """Differentiable cbp_vector for autodiff graphs."""
    x1, x2 = ad.lift(x1), ad.lift(x2)
    out = cbp_vector(x1.value, x2.value, params1, params2)

    def vjp(up):
        return cbp_gradient(up, x1.value, x2.value, params1, params2)

    return ad.Var(out, (x1, x2), vjp)
