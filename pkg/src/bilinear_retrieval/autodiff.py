"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Var wraps an ndarray value plus the closure needed to push a cotangent
back to its parents. Graphs are built per forward pass and discarded after
backward(), so parameters live as plain arrays outside the engine and are
wrapped fresh each step. Everything is single-threaded and deterministic.

The differentiable wrappers here mirror the primitives in tensor_ops;
domain modules (sketch, fusion, losses, model) register their own custom
Vars through the same mechanism.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import tensor_ops as T
from .errors import ShapeError

# Active kink recorder (see record_kinks); single-threaded by contract.
_KINK_RECORDER: list | None = None


@contextmanager
def record_kinks():
    """Collect (kind, array) markers at non-smooth points of the forward
    pass: relu activation sign masks and signed-sqrt inputs. Used by
    finite-difference checks to skip coordinates that straddle a kink."""
    global _KINK_RECORDER
    prev = _KINK_RECORDER
    _KINK_RECORDER = rec = []
    try:
        yield rec
    finally:
        _KINK_RECORDER = prev


def _note_kink(kind: str, arr: np.ndarray) -> None:
    if _KINK_RECORDER is not None:
        _KINK_RECORDER.append((kind, arr))


class Var:
    """Node in the backward graph: a value and its vector-Jacobian product."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value)
        self.grad = None
        self._parents = tuple(parents)
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape


def lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def value(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def backward(root: Var, seed=None) -> None:
    """Accumulate gradients of `root` into every reachable Var's .grad."""
    order: list[Var] = []
    visiting: list[tuple[Var, int]] = [(root, 0)]
    seen: set[int] = set()
    while visiting:
        node, state = visiting.pop()
        if state == 0:
            if id(node) in seen:
                continue
            seen.add(id(node))
            visiting.append((node, 1))
            for p in node._parents:
                if id(p) not in seen:
                    visiting.append((p, 0))
        else:
            order.append(node)
    if seed is None:
        seed = np.ones_like(root.value)
    root.grad = np.asarray(seed, dtype=root.value.dtype)
    for node in reversed(order):
        if node.grad is None or node._vjp is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# ---------------------------------------------------------------------------
# differentiable primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Var:
    a, b = lift(a), lift(b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    return Var(a.value + b.value, (a, b), lambda up: (up, up))


def sub(a, b) -> Var:
    a, b = lift(a), lift(b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")
    return Var(a.value - b.value, (a, b), lambda up: (up, -up))


def mul(a, b) -> Var:
    a, b = lift(a), lift(b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    av, bv = a.value, b.value
    return Var(av * bv, (a, b), lambda up: (up * bv, up * av))


def scale(a, c: float) -> Var:
    a = lift(a)
    return Var(a.value * c, (a,), lambda up: (up * c,))


def mean_all(a) -> Var:
    a = lift(a)
    n = a.value.size
    return Var(np.asarray(a.value.mean()), (a,), lambda up: (np.full_like(a.value, up / n),))


def concat_vec(parts) -> Var:
    parts = [lift(p) for p in parts]
    for p in parts:
        if p.value.ndim != 1:
            raise ShapeError("concat_vec expects 1-D vectors")
    sizes = [p.value.shape[0] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(up):
        return tuple(np.split(up, splits))

    return Var(np.concatenate([p.value for p in parts]), tuple(parts), vjp)


def concat_channels(a, b) -> Var:
    a, b = lift(a), lift(b)
    if a.value.shape[1:] != b.value.shape[1:]:
        raise ShapeError("concat_channels expects matching spatial shapes")
    ca = a.value.shape[0]
    return Var(
        np.concatenate([a.value, b.value], axis=0),
        (a, b),
        lambda up: (up[:ca], up[ca:]),
    )


def relu(a) -> Var:
    a = lift(a)
    mask = a.value > 0
    _note_kink("relu", mask)
    return Var(a.value * mask, (a,), lambda up: (up * mask,))


def sigmoid(a) -> Var:
    a = lift(a)
    s = T.activate(a.value, "sigmoid")
    return Var(s, (a,), lambda up: (up * s * (1.0 - s),))


def softmax_last(a) -> Var:
    a = lift(a)
    s = T.activate(a.value, "softmax")

    def vjp(up):
        inner = (up * s).sum(axis=-1, keepdims=True)
        return (s * (up - inner),)

    return Var(s, (a,), vjp)


def signed_sqrt(a) -> Var:
    a = lift(a)
    x = a.value
    _note_kink("signed_sqrt", x.copy())
    y = T.signed_sqrt(x)

    def vjp(up):
        # subgradient 0 at x == 0; elsewhere d/dx sign(x)sqrt(|x|) = 1/(2 sqrt(|x|))
        g = np.zeros_like(x)
        nz = x != 0
        g[nz] = 0.5 / np.sqrt(np.abs(x[nz]))
        return (up * g,)

    return Var(y, (a,), vjp)


def l2_normalize(a, eps: float = 1e-12) -> Var:
    a = lift(a)
    x = a.value
    norm = float(np.sqrt((x * x).sum()))
    if norm >= eps:
        y = x / norm

        def vjp(up):
            return ((up - y * (y * up).sum()) / norm,)

    else:
        y = x / eps

        def vjp(up):
            return (up / eps,)

    return Var(y, (a,), vjp)


def linear(weight, bias, x) -> Var:
    """Affine map: weight (out, in) @ x (in,) [+ bias (out,)]."""
    weight, x = lift(weight), lift(x)
    Wv, xv = weight.value, x.value
    if Wv.ndim != 2 or xv.ndim != 1 or Wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"linear shapes incompatible: {Wv.shape} @ {xv.shape}")
    if bias is None:
        return Var(Wv @ xv, (weight, x), lambda up: (np.outer(up, xv), Wv.T @ up))
    bias = lift(bias)
    if bias.value.shape != (Wv.shape[0],):
        raise ShapeError(f"bias shape {bias.value.shape} != ({Wv.shape[0]},)")
    return Var(
        Wv @ xv + bias.value,
        (weight, bias, x),
        lambda up: (np.outer(up, xv), up, Wv.T @ up),
    )


def global_avg_pool(a) -> Var:
    a = lift(a)
    C, H, W = a.value.shape
    area = H * W

    def vjp(up):
        return (np.repeat(up / area, area).reshape(C, H, W),)

    return Var(T.global_avg_pool(a.value), (a,), vjp)


def avg_pool2d(a, window, stride=None) -> Var:
    a = lift(a)
    out = T.avg_pool2d(a.value, window, stride)
    h, w = window
    sh, sw = stride if stride is not None else window
    C, H, W = a.value.shape
    _, Ho, Wo = out.shape

    def vjp(up):
        g = np.zeros_like(a.value)
        u = up / (h * w)
        for i in range(h):
            for j in range(w):
                g[:, i : i + sh * Ho : sh, j : j + sw * Wo : sw] += u
        return (g,)

    return Var(out, (a,), vjp)


def upsample_nearest(a, factor: tuple[int, int]) -> Var:
    a = lift(a)
    kh, kw = factor
    if kh < 1 or kw < 1:
        raise ShapeError("upsample factors must be >= 1")
    C, H, W = a.value.shape
    out = np.repeat(np.repeat(a.value, kh, axis=1), kw, axis=2)

    def vjp(up):
        return (up.reshape(C, H, kh, W, kw).sum(axis=(2, 4)),)

    return Var(out, (a,), vjp)


def fiber(v, i: int, j: int) -> Var:
    """Extract the channel fiber at spatial location (i, j) of a (C, H, W) map."""
    v = lift(v)
    if v.value.ndim != 3:
        raise ShapeError("fiber expects a (C, H, W) map")

    def vjp(up):
        g = np.zeros_like(v.value)
        g[:, i, j] = up
        return (g,)

    return Var(v.value[:, i, j].copy(), (v,), vjp)


def stack_spatial(fibers, height: int, width: int) -> Var:
    """Assemble H*W fibers (row-major order) into a (C, H, W) map."""
    fibers = [lift(f) for f in fibers]
    if len(fibers) != height * width:
        raise ShapeError(f"need {height * width} fibers, got {len(fibers)}")
    c = fibers[0].value.shape[0]
    out = np.stack([f.value for f in fibers], axis=1).reshape(c, height, width)

    def vjp(up):
        flat = up.reshape(c, height * width)
        return tuple(flat[:, k] for k in range(height * width))

    return Var(out, tuple(fibers), vjp)


def channel_scale(v, alpha) -> Var:
    """Multiply each channel of v (C, H, W) by its weight alpha (C,)."""
    v, alpha = lift(v), lift(alpha)
    Vv, av = v.value, alpha.value
    if av.ndim != 1 or Vv.ndim != 3 or av.shape[0] != Vv.shape[0]:
        raise ShapeError(f"channel_scale shapes incompatible: {Vv.shape} vs {av.shape}")
    out = Vv * av[:, None, None]

    def vjp(up):
        return (up * av[:, None, None], (up * Vv).sum(axis=(1, 2)))

    return Var(out, (v, alpha), vjp)
