"""Minimal reverse-mode tensor engine on numpy arrays.

Only the operations the decoders need: dense transforms, embedding
gathers, concatenation, softmax / log-softmax, layer normalization,
reductions, and the reshapes that multi-head attention requires.
float32 is the working precision; float64 is used by the gradient
checker. Backward visits the recorded graph once in reverse topological
order.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared in a tensor."""


class ShapeMismatch(ValueError):
    pass


def _check_finite(data: Array, where: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values in {where}")


class Tensor:
    """An ndarray plus the tape entry that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 _parents: tuple = (), _backward: Callable | None = None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        _check_finite(arr, "tensor")
        self.data = arr
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: Array) -> None:
        self.grad = g if self.grad is None else self.grad + g

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad over the whole tape."""
        if self.data.size != 1:
            raise ShapeMismatch("backward() expects a scalar")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic sugar used by the optimizer tests
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    __radd__ = __add__
    __rmul__ = __mul__


def _wrap(value, dtype) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=dtype))


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, dtype=dtype)


def parameter(data, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum grad back down to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _make(data: Array, parents: tuple, backward: Callable | None) -> Tensor:
    track = any(p.requires_grad or p._parents for p in parents)
    if not track:
        return Tensor(data)
    out = Tensor(data, _parents=parents, _backward=backward)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g: Array) -> None:
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g: Array) -> None:
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    data = a.data * s

    def backward(g: Array) -> None:
        a._accumulate(g * s)

    return _make(data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    data = np.matmul(a.data, b.data)

    def backward(g: Array) -> None:
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        a._accumulate(_unbroadcast(ga, a.shape))
        b._accumulate(_unbroadcast(gb, b.shape))

    return _make(data, (a, b), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0)

    def backward(g: Array) -> None:
        a._accumulate(g * (a.data > 0))

    return _make(data, (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def backward(g: Array) -> None:
        a._accumulate(g.reshape(a.shape))

    return _make(data, (a,), backward)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    data = a.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g: Array) -> None:
        a._accumulate(g.transpose(inverse))

    return _make(data, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0, *sizes])

    def backward(g: Array) -> None:
        for t, lo, hi in zip(tensors, offsets, offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return _make(data, tuple(tensors), backward)


def gather_rows(table: Tensor, ids: Array) -> Tensor:
    """table[ids]: rows of a [V, E] table at integer ids of any shape."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeMismatch(
            f"ids in [{ids.min()}, {ids.max()}] out of range for table {table.shape}"
        )
    data = table.data[ids]

    def backward(g: Array) -> None:
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        table._accumulate(gt)

    return _make(data, (table,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax along the trailing axis, max-subtracted for stability."""
    _check_finite(a.data, "softmax input")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g: Array) -> None:
        dot = (g * data).sum(axis=-1, keepdims=True)
        a._accumulate(data * (g - dot))

    return _make(data, (a,), backward)


def log_softmax_rows(a: Tensor) -> Tensor:
    _check_finite(a.data, "log_softmax input")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    data = shifted - lse
    soft = np.exp(data)

    def backward(g: Array) -> None:
        a._accumulate(g - soft * g.sum(axis=-1, keepdims=True))

    return _make(data, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the trailing axis to zero mean / unit variance, then
    scale and shift."""
    mean = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mean
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    normed = centered * inv
    data = normed * gain.data + bias.data
    n = a.shape[-1]

    def backward(g: Array) -> None:
        gn = g * gain.data
        gain._accumulate(_unbroadcast(g * normed, gain.shape))
        bias._accumulate(_unbroadcast(g, bias.shape))
        # d/dx of (x - mean) * inv with mean/var both functions of x
        gi = (gn - gn.mean(axis=-1, keepdims=True)
              - normed * (gn * normed).mean(axis=-1, keepdims=True)) * inv
        a._accumulate(gi)

    return _make(data, (a, gain, bias), backward)


def sum_all(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum(), dtype=a.dtype)

    def backward(g: Array) -> None:
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.data.size)


def grad_check(f: Callable[..., Tensor], params: Sequence[Tensor],
               eps: float = 1e-6) -> float:
    """Max relative error between reverse-mode and central differences.

    The error per coordinate is |analytic - numeric| divided by
    max(1e-8, |analytic| + |numeric|). For float32 parameters the
    numeric side is evaluated on float64 copies: float32 forward noise
    would otherwise swamp the difference quotient, and the point is to
    verify the float32 reverse pass against an accurate reference.
    """
    for p in params:
        p.zero_grad()
    out = f(*params)
    if out.data.size != 1:
        raise ShapeMismatch("grad_check expects a scalar-valued f")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    for g in analytic:
        _check_finite(g, "analytic gradient")

    if params and params[0].dtype == np.float32:
        probes = [Tensor(p.data.astype(np.float64), requires_grad=True)
                  for p in params]
    else:
        probes = list(params)

    worst = 0.0
    for p, a in zip(probes, analytic):
        flat = p.data.reshape(-1)
        grad_flat = a.reshape(-1).astype(np.float64)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = float(f(*probes).data)
            flat[i] = keep - eps
            lo = float(f(*probes).data)
            flat[i] = keep
            numeric = (hi - lo) / (2 * eps)
            denom = max(1e-8, abs(grad_flat[i]) + abs(numeric))
            worst = max(worst, abs(grad_flat[i] - numeric) / denom)
    return worst
