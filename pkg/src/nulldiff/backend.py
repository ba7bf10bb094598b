"""Dense float64 tensors with reverse-mode differentiation.

numpy supplies the raw kernels (BLAS matmul, strided views); the gradient
tape, the operator set, and the finite-difference checker are local. All
computation is 64-bit; tensors are treated as immutable once created and
every operation is a pure function, so values can be shared freely across
threads. A tape has a single writer: one training step owns one tape.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf as _erf

from .errors import DimensionError, InputError, NumericError

__all__ = [
    "Tensor",
    "GradTape",
    "tensor",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "gemm",
    "conv1d",
    "layer_norm",
    "attention",
    "softmax",
    "gelu",
    "reshape",
    "transpose",
    "tsum",
    "tmean",
    "power",
    "sqrt",
    "exp",
    "grad_check",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


class Tensor:
    """A dense float64 array plus a gradient-tracking flag.

    ``data`` is row-major; ``requires_grad`` marks trainable leaves and
    propagates through operations.
    """

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        grad = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{grad})"

    # arithmetic sugar; constants are coerced to untracked tensors
    def __add__(self, other):
        return add(self, tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, tensor(other))

    def __rsub__(self, other):
        return sub(tensor(other), self)

    def __mul__(self, other):
        return mul(self, tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, tensor(other))

    def __rtruediv__(self, other):
        return div(tensor(other), self)

    def __neg__(self):
        return mul(self, tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, tensor(other))


def tensor(x) -> Tensor:
    """Coerce scalars/arrays to an untracked Tensor; pass Tensors through."""
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# gradient tape
# ---------------------------------------------------------------------------

_ACTIVE_TAPE: "GradTape | None" = None


class GradTape:
    """Records operations so gradients can be pulled back to parameters.

    Records are replayed in strict reverse execution order with a fixed
    accumulation order, so identical forward passes produce bitwise
    identical gradients.
    """

    def __init__(self):
        # holds strong refs to outputs so id() stays unique for the tape's life
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a gradient tape is already active")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable):
        """backward(grad_out) -> per-input gradients (None for untracked)."""
        self._records.append((out, inputs, backward))

    def gradients(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """d(loss)/d(p) for every p in params; zeros where disconnected."""
        if loss.size != 1:
            raise DimensionError("gradients need a scalar loss")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward in reversed(self._records):
            g = grads.get(id(out))
            if g is None:
                continue
            for inp, gi in zip(inputs, backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        out = []
        for p in params:
            g = grads.get(id(p))
            out.append(np.zeros_like(p.data) if g is None else np.asarray(g))
        return out


def _track(out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
    if _ACTIVE_TAPE is not None and out.requires_grad:
        _ACTIVE_TAPE.record(out, inputs, backward)
    return out


def _any_grad(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and reduction primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, _any_grad(a, b))
    return _track(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, _any_grad(a, b))
    return _track(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, _any_grad(a, b))

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _track(out, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data / b.data, _any_grad(a, b))

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _track(out, (a, b), backward)


def power(x: Tensor, p: float) -> Tensor:
    out = Tensor(x.data**p, x.requires_grad)
    return _track(out, (x,), lambda g: (g * (p * x.data ** (p - 1.0)),))


def sqrt(x: Tensor) -> Tensor:
    out = Tensor(np.sqrt(x.data), x.requires_grad)
    return _track(out, (x,), lambda g: (g * (0.5 / out.data),))


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data), x.requires_grad)
    return _track(out, (x,), lambda g: (g * out.data,))


def erf(x: Tensor) -> Tensor:
    out = Tensor(_erf(x.data), x.requires_grad)
    return _track(out, (x,), lambda g: (g * (_TWO_OVER_SQRT_PI * np.exp(-x.data * x.data)),))


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), x.requires_grad)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _track(out, (x,), backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else np.prod([x.shape[i] for i in np.atleast_1d(axis)])
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims), x.requires_grad)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _track(out, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape), x.requires_grad)
    return _track(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(x.data.transpose(axes), x.requires_grad)
    return _track(out, (x,), lambda g: (g.transpose(inv),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, x.requires_grad)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _track(out, (x,), backward)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the trailing two axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must have ndim >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, _any_grad(a, b))
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        ga = gb = None
        if need_a:
            ga = _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape)
        if need_b:
            gb = _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape)
        return ga, gb

    return _track(out, (a, b), backward)


def gemm(a: Tensor, b: Tensor) -> Tensor:
    """Plain 2-D matrix product; strict shape contract."""
    a, b = tensor(a), tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("gemm expects two matrices")
    return matmul(a, b)


def conv1d(x: Tensor, kernel: Tensor, stride: int = 1) -> Tensor:
    """Valid (no padding) cross-correlation along the last axis.

    ``x`` is (C_in, T) or batched (B, C_in, T); ``kernel`` is
    (C_out, C_in, k). Output length is floor((T - k) / stride) + 1.
    """
    x, kernel = tensor(x), tensor(kernel)
    if stride < 1:
        raise InputError("conv1d stride must be >= 1")
    squeeze = x.ndim == 2
    if squeeze:
        x3 = reshape(x, (1,) + x.shape)
    elif x.ndim == 3:
        x3 = x
    else:
        raise DimensionError("conv1d input must be (C,T) or (B,C,T)")
    if kernel.ndim != 3:
        raise DimensionError("conv1d kernel must be (C_out, C_in, k)")
    B, c_in, T = x3.shape
    c_out, kc_in, k = kernel.shape
    if kc_in != c_in:
        raise DimensionError(f"conv1d channel mismatch: input {c_in}, kernel {kc_in}")
    if T < k:
        raise InputError(f"conv1d input too short: T={T} < kernel={k}")
    t_out = (T - k) // stride + 1

    windows = np.lib.stride_tricks.sliding_window_view(x3.data, k, axis=2)[:, :, ::stride, :]
    cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(B, t_out, c_in * k)
    w2d = kernel.data.reshape(c_out, c_in * k)
    out_data = (cols @ w2d.T).transpose(0, 2, 1)  # (B, C_out, T_out)
    out = Tensor(out_data, _any_grad(x3, kernel))
    need_x, need_w = x3.requires_grad, kernel.requires_grad

    def backward(g):
        gx = gw = None
        gt = np.ascontiguousarray(g.transpose(0, 2, 1))  # (B, T_out, C_out)
        if need_w:
            gw = (
                gt.reshape(B * t_out, c_out).T @ cols.reshape(B * t_out, c_in * k)
            ).reshape(c_out, c_in, k)
        if need_x:
            gcols = (gt @ w2d).reshape(B, t_out, c_in, k)
            gx = np.zeros((B, c_in, T))
            for j in range(k):
                gx[:, :, j : j + stride * t_out : stride] += gcols[:, :, :, j].transpose(0, 2, 1)
        return gx, gw

    out = _track(out, (x3, kernel), backward)
    return reshape(out, (c_out, t_out)) if squeeze else out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit population variance,
    then apply the affine (gain, bias)."""
    x, gain, bias = tensor(x), tensor(gain), tensor(bias)
    if x.shape[-1] < 2:
        raise DimensionError("layer_norm needs at least 2 features")
    if eps < 0:
        raise InputError("layer_norm eps must be >= 0")
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    normed = div(centered, sqrt(add(var, tensor(eps))))
    return add(mul(normed, gain), bias)


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Scaled dot-product attention over the trailing two axes.

    ``q`` is (..., T_q, d); ``k``/``v`` are (..., T_k, d). Softmax is taken
    row-wise over the key axis.
    """
    q, k, v = tensor(q), tensor(k), tensor(v)
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError("attention head dims disagree")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError("attention key/value counts disagree")
    d = q.shape[-1]
    kt = transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2))
    scores = mul(matmul(q, kt), tensor(1.0 / math.sqrt(d)))
    return matmul(softmax(scores, axis=-1), v)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    x = tensor(x)
    return mul(mul(x, tensor(0.5)), add(tensor(1.0), erf(mul(x, tensor(_INV_SQRT2)))))


# ---------------------------------------------------------------------------
# validation harness
# ---------------------------------------------------------------------------


def grad_check(
    f: Callable[[Tensor], Tensor],
    theta: Tensor,
    h: float = 1e-5,
    coords: Iterable[int] | None = None,
) -> float:
    """Compare the tape gradient of ``f`` at ``theta`` against central
    finite differences, coordinate by coordinate.

    Returns the maximum relative error, where each coordinate's error is
    |g_tape - g_fd| / max(|g_tape|, |g_fd|, 1). ``coords`` restricts the
    sweep to a subset of flat indices (useful for large parameter blocks).
    """
    if not (1e-6 <= h <= 1e-4):
        raise InputError("grad_check step h must lie in [1e-6, 1e-4]")
    theta = tensor(theta)
    theta.requires_grad = True
    with GradTape() as tape:
        loss = f(theta)
    if loss.size != 1:
        raise DimensionError("grad_check needs a scalar-valued f")
    if not np.isfinite(loss.data).all():
        raise NumericError("grad_check: f produced a non-finite value")
    (g,) = tape.gradients(loss, [theta])
    g_flat = g.reshape(-1)
    flat = theta.data.reshape(-1)
    index_iter = range(flat.size) if coords is None else coords
    max_rel = 0.0
    for i in index_iter:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(theta).data)
        flat[i] = orig - h
        fm = float(f(theta).data)
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError("grad_check: non-finite value during finite differences")
        fd = (fp - fm) / (2.0 * h)
        rel = abs(g_flat[i] - fd) / max(abs(g_flat[i]), abs(fd), 1.0)
        max_rel = max(max_rel, rel)
    return max_rel
