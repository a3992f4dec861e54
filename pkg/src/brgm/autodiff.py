"""Dense float64 tensors with tape-based reverse-mode differentiation.

A :class:`Tape` records every primitive evaluated while it is active and
whose operands include a tensor watched by that tape.  Gradients are
obtained by walking the record backwards::

    with Tape() as tape:
        x = tape.watch(np.array([3.0]))
        y = (x * x).sum()
    (dx,) = tape.gradient(y, [x])

Broadcasting is deliberately restricted to scalar-with-tensor; any other
shape disagreement raises :class:`~brgm.errors.ShapeMismatch`.  Use
:func:`broadcast_to` when an expansion is intended.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import LeafNotOnTape, NonFiniteValue, NotScalarOutput, ShapeMismatch

_state = threading.local()


def _tape_stack() -> list:
    if not hasattr(_state, "stack"):
        _state.stack = []
    return _state.stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Immutable n-dimensional float64 array, optionally tracked by a tape."""

    __slots__ = ("data", "_tape", "_id")
    __array_priority__ = 1000

    def __init__(self, data, *, _tape: "Tape | None" = None, _id: int | None = None):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue("tensor contains NaN or Inf")
        arr.setflags(write=False)
        self.data = arr
        self._tape = _tape
        self._id = _id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return np.array(self.data)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def __float__(self) -> float:
        return float(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        tag = "" if self._tape is None else f", tracked#{self._id}"
        return f"Tensor(shape={self.shape}{tag})\n{self.data!r}"

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __truediv__ = lambda self, other: div(self, other)
    __rtruediv__ = lambda self, other: div(other, self)
    __matmul__ = lambda self, other: matmul(self, other)
    __rmatmul__ = lambda self, other: matmul(other, self)
    __neg__ = lambda self: neg(self)
    __getitem__ = lambda self, index: getitem(self, index)

    def __pow__(self, p):
        return power(self, p)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


@dataclass
class _Node:
    op: str
    inputs: tuple  # node id (int) for tracked operands, ndarray for constants
    fwd: Callable
    vjp: Callable | None
    value: np.ndarray


@dataclass
class Tape:
    """Ordered record of primitive evaluations for one forward pass."""

    nodes: list = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        elif self in stack:
            stack.remove(self)

    def watch(self, value) -> Tensor:
        """Register ``value`` as a differentiable leaf and return its tracked handle."""
        arr = value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)
        t = Tensor(arr, _tape=self, _id=len(self.nodes))
        self.nodes.append(_Node("leaf", (), None, None, t.data))
        return t

    def _record(self, op, inputs, fwd, vjp, value) -> Tensor:
        out = Tensor(value, _tape=self, _id=len(self.nodes))
        self.nodes.append(_Node(op, inputs, fwd, vjp, out.data))
        return out

    def owns(self, t) -> bool:
        return isinstance(t, Tensor) and t._tape is self

    def gradient(self, output: Tensor, wrt: Sequence[Tensor]) -> list[Tensor]:
        """Return d(output)/d(leaf) for each leaf in ``wrt``.

        The tape itself is left untouched, so the call may be repeated.
        """
        if not self.owns(output):
            raise LeafNotOnTape("output was not computed on this tape")
        if output.size != 1:
            raise NotScalarOutput(f"output has shape {output.shape}")
        for leaf in wrt:
            if not self.owns(leaf) or self.nodes[leaf._id].op != "leaf":
                raise LeafNotOnTape("gradient target is not a leaf watched by this tape")
        adj: dict[int, np.ndarray] = {output._id: np.ones_like(output.data)}
        for idx in range(output._id, -1, -1):
            g = adj.pop(idx, None) if self.nodes[idx].op != "leaf" else adj.get(idx)
            node = self.nodes[idx]
            if g is None or node.op == "leaf":
                continue
            operands = [self.nodes[i].value if isinstance(i, int) else i for i in node.inputs]
            grads = node.vjp(g, node.value, *operands)
            for src, gi in zip(node.inputs, grads):
                if gi is None or not isinstance(src, int):
                    continue
                if src in adj:
                    adj[src] = adj[src] + gi
                else:
                    adj[src] = np.asarray(gi, dtype=np.float64)
        return [Tensor(adj.get(leaf._id, np.zeros_like(leaf.data)).reshape(leaf.shape)) for leaf in wrt]

    def replay(self) -> list[np.ndarray]:
        """Recompute every recorded value in topological order from the leaves."""
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op == "leaf":
                values.append(node.value)
                continue
            operands = [values[i] if isinstance(i, int) else i for i in node.inputs]
            with np.errstate(all="ignore"):
                values.append(np.asarray(node.fwd(*operands), dtype=np.float64))
        return values


def grad(output: Tensor, wrt: Sequence[Tensor]) -> list[Tensor]:
    """Gradient helper using the tape that recorded ``output``."""
    if not isinstance(output, Tensor) or output._tape is None:
        raise LeafNotOnTape("output is not on any tape")
    return output._tape.gradient(output, wrt)


def value_and_grad(fn: Callable, *args):
    """Evaluate ``fn(*args)`` on a fresh tape; return (value, [grad per arg])."""
    with Tape() as tape:
        leaves = [tape.watch(a) for a in args]
        out = fn(*leaves)
    return out.item(), [g.data for g in tape.gradient(out, leaves)]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """Detached copy of ``x`` (never tracked)."""
    return Tensor(x.data if isinstance(x, Tensor) else x)


def _apply(op: str, fwd: Callable, vjp: Callable, *operands) -> Tensor:
    tensors = [as_tensor(o) for o in operands]
    with np.errstate(all="ignore"):
        value = np.asarray(fwd(*[t.data for t in tensors]), dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"{op} produced a non-finite value")
    tape = active_tape()
    if tape is not None and any(tape.owns(t) for t in tensors):
        inputs = tuple(t._id if tape.owns(t) else t.data for t in tensors)
        return tape._record(op, inputs, fwd, vjp, value)
    return Tensor(value)


# ---------------------------------------------------------------- elementwise


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not conform")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    return np.asarray(g.sum()) if shape == () and g.shape != () else g


def _binary(op, fwd, da, db):
    def vjp(g, out, a, b):
        return _unbroadcast(da(g, out, a, b), a.shape), _unbroadcast(db(g, out, a, b), b.shape)

    def call(a, b):
        a, b = as_tensor(a), as_tensor(b)
        _check_binary(a, b, op)
        return _apply(op, fwd, vjp, a, b)

    call.__name__ = op
    return call


add = _binary("add", np.add, lambda g, o, a, b: g, lambda g, o, a, b: g)
sub = _binary("sub", np.subtract, lambda g, o, a, b: g, lambda g, o, a, b: -g)
mul = _binary("mul", np.multiply, lambda g, o, a, b: g * b, lambda g, o, a, b: g * a)
div = _binary("div", np.divide, lambda g, o, a, b: g / b, lambda g, o, a, b: -g * a / (b * b))


def _unary(op, fwd, deriv):
    def vjp(g, out, x):
        return (g * deriv(out, x),)

    def call(x):
        return _apply(op, fwd, vjp, x)

    call.__name__ = op
    return call


neg = _unary("neg", np.negative, lambda o, x: -np.ones_like(x))
exp = _unary("exp", np.exp, lambda o, x: o)
log = _unary("log", np.log, lambda o, x: 1.0 / x)
sqrt = _unary("sqrt", np.sqrt, lambda o, x: 0.5 / o)
square = _unary("square", np.square, lambda o, x: 2.0 * x)
tabs = _unary("abs", np.abs, lambda o, x: np.sign(x))
cos = _unary("cos", np.cos, lambda o, x: -np.sin(x))


def _softplus(x):
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


softplus = _unary("softplus", _softplus, lambda o, x: _sigmoid(x))
sigmoid = _unary("sigmoid", _sigmoid, lambda o, x: o * (1.0 - o))


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    def fwd(v):
        return np.where(v > 0, v, slope * v)

    def vjp(g, out, v):
        return (np.where(v > 0, g, slope * g),)

    return _apply("leaky_relu", fwd, vjp, x)


def power(x, p: float) -> Tensor:
    p = float(p)

    def fwd(v):
        return np.power(v, p)

    def vjp(g, out, v):
        return (g * p * np.power(v, p - 1.0),)

    return _apply("power", fwd, vjp, x)


# ----------------------------------------------------------------- reductions


def tsum(x, axis=None) -> Tensor:
    def fwd(v):
        return np.sum(v, axis=axis)

    def vjp(g, out, v):
        if axis is None:
            return (np.broadcast_to(g, v.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), v.shape).copy(),)

    return _apply("sum", fwd, vjp, x)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis) * (1.0 / float(n))


# --------------------------------------------------------------------- shapes


def reshape(x, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)

    def fwd(v):
        return np.reshape(v, shape)

    def vjp(g, out, v):
        return (np.reshape(g, v.shape),)

    return _apply("reshape", fwd, vjp, x)


def transpose(x, axes=None) -> Tensor:
    inv = None if axes is None else tuple(np.argsort(axes))

    def fwd(v):
        return np.transpose(v, axes)

    def vjp(g, out, v):
        return (np.transpose(g, inv),)

    return _apply("transpose", fwd, vjp, x)


def broadcast_to(x, shape) -> Tensor:
    """Explicit expansion; size-1 and missing leading axes are repeated."""
    shape = tuple(shape)
    x = as_tensor(x)
    try:
        np.broadcast_shapes(x.shape, shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot broadcast {x.shape} to {shape}") from exc
    lead = len(shape) - x.ndim

    def fwd(v):
        return np.broadcast_to(v, shape).copy()

    def vjp(g, out, v):
        r = g.sum(axis=tuple(range(lead))) if lead else g
        keep = tuple(i for i, s in enumerate(v.shape) if s == 1 and r.shape[i] != 1)
        if keep:
            r = r.sum(axis=keep, keepdims=True)
        return (r.reshape(v.shape),)

    return _apply("broadcast_to", fwd, vjp, x)


def getitem(x, index) -> Tensor:
    def fwd(v):
        return v[index]

    def vjp(g, out, v):
        r = np.zeros_like(v)
        np.add.at(r, index, g)
        return (r,)

    return _apply("getitem", fwd, vjp, x)


def take(x, indices, axis: int) -> Tensor:
    """Gather along ``axis`` with an integer index array (repeats allowed)."""
    idx = np.asarray(indices, dtype=np.intp)

    def fwd(v):
        return np.take(v, idx, axis=axis)

    def vjp(g, out, v):
        r = np.zeros_like(v)
        gm = np.moveaxis(g, axis, 0)
        rm = np.moveaxis(r, axis, 0)
        np.add.at(rm, idx, gm)
        return (r,)

    return _apply("take", fwd, vjp, x)


def stack(xs: Sequence, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    if len({x.shape for x in xs}) != 1:
        raise ShapeMismatch("stack: operands differ in shape")

    def fwd(*vs):
        return np.stack(vs, axis=axis)

    def vjp(g, out, *vs):
        return tuple(np.take(g, i, axis=axis) for i in range(len(vs)))

    return _apply("stack", fwd, vjp, *xs)


def concat(xs: Sequence, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def fwd(*vs):
        return np.concatenate(vs, axis=axis)

    def vjp(g, out, *vs):
        return tuple(np.split(g, cuts, axis=axis))

    return _apply("concat", fwd, vjp, *xs)


def pad(x, widths, mode: str = "reflect") -> Tensor:
    """Pad with ``widths`` = [(before, after), ...] per axis.

    ``mode`` is ``"reflect"`` (mirror excluding the edge sample), ``"edge"``
    or ``"zero"``.
    """
    x = as_tensor(x)
    widths = [tuple(int(a) for a in w) for w in widths]
    if len(widths) != x.ndim:
        raise ShapeMismatch("pad: one (before, after) pair per axis required")
    if mode == "zero":
        def fwd(v):
            return np.pad(v, widths)

        def vjp(g, out, v):
            sl = tuple(slice(b, b + n) for (b, _), n in zip(widths, v.shape))
            return (g[sl],)

        return _apply("pad", fwd, vjp, x)
    out = x
    for axis, (before, after) in enumerate(widths):
        if before == 0 and after == 0:
            continue
        n = x.shape[axis]
        if mode == "reflect" and max(before, after) > n - 1:
            raise ShapeMismatch(f"reflect pad {max(before, after)} too wide for extent {n}")
        pos = np.arange(-before, n + after)
        if mode == "reflect":
            period = 2 * (n - 1) if n > 1 else 1
            pos = np.abs(np.mod(pos, period))
            pos = np.where(pos > n - 1, period - pos, pos)
        elif mode == "edge":
            pos = np.clip(pos, 0, n - 1)
        else:
            raise ValueError(f"unknown pad mode {mode!r}")
        out = take(out, pos, axis)
    return out


def upsample_nearest(x, factor: int = 2) -> Tensor:
    """Repeat each of the last two axes ``factor`` times."""
    x = as_tensor(x)
    h, w = x.shape[-2:]
    out = take(x, np.repeat(np.arange(h), factor), x.ndim - 2)
    return take(out, np.repeat(np.arange(w), factor), x.ndim - 1)


# --------------------------------------------------------------------- linear


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeMismatch("matmul supports 1-D and 2-D operands only")
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def vjp(g, out, av, bv):
        a2 = av if av.ndim == 2 else av[None, :]
        b2 = bv if bv.ndim == 2 else bv[:, None]
        g2 = g.reshape(a2.shape[0], b2.shape[1])
        return (g2 @ b2.T).reshape(av.shape), (a2.T @ g2).reshape(bv.shape)

    return _apply("matmul", np.matmul, vjp, a, b)


def conv2d(x, weight, stride: int = 1) -> Tensor:
    """Valid cross-correlation.

    ``x`` is (C_in, H, W) or (N, C_in, H, W); ``weight`` is (C_out, C_in, kh, kw).
    Output extent per axis is ``(in - k) // stride + 1``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 4 or x.ndim not in (3, 4):
        raise ShapeMismatch("conv2d expects x (C,H,W)|(N,C,H,W) and weight (O,C,kh,kw)")
    batched = x.ndim == 4
    cin, h, w = x.shape[-3:]
    _, wc, kh, kw = weight.shape
    if wc != cin:
        raise ShapeMismatch(f"conv2d: {cin} input channels vs weight expecting {wc}")
    if kh > h or kw > w:
        raise ShapeMismatch(f"conv2d: kernel {kh}x{kw} exceeds input {h}x{w}")
    s = int(stride)
    ho, wo = (h - kh) // s + 1, (w - kw) // s + 1

    def cols(v4):
        win = sliding_window_view(v4, (kh, kw), axis=(2, 3))[:, :, ::s, ::s][:, :, :ho, :wo]
        # (N, Ho, Wo, C*kh*kw)
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(v4.shape[0], ho, wo, cin * kh * kw)

    def fwd(v, k):
        v4 = v if batched else v[None]
        out = cols(v4) @ k.reshape(k.shape[0], -1).T
        out = out.transpose(0, 3, 1, 2)
        return out if batched else out[0]

    def vjp(g, out, v, k):
        v4 = v if batched else v[None]
        g4 = (g if batched else g[None]).transpose(0, 2, 3, 1)  # (N, Ho, Wo, O)
        kmat = k.reshape(k.shape[0], -1)
        c = cols(v4)
        dk = (g4.reshape(-1, kmat.shape[0]).T @ c.reshape(-1, kmat.shape[1])).reshape(k.shape)
        gcol = (g4 @ kmat).reshape(v4.shape[0], ho, wo, cin, kh, kw)
        dx = np.zeros_like(v4)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += (
                    gcol[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        return (dx if batched else dx[0]), dk

    return _apply("conv2d", fwd, vjp, x, weight)


def cosine_similarity(a, b) -> Tensor:
    """Cosine of the angle between ``a`` and ``b`` along the last axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"cosine_similarity: {a.shape} vs {b.shape}")

    def fwd(u, v):
        return np.sum(u * v, axis=-1) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))

    def vjp(g, out, u, v):
        nu = np.linalg.norm(u, axis=-1, keepdims=True)
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        c = out[..., None]
        ge = g[..., None]
        du = ge * (v / (nu * nv) - c * u / (nu * nu))
        dv = ge * (u / (nu * nv) - c * v / (nv * nv))
        return du, dv

    return _apply("cosine_similarity", fwd, vjp, a, b)


def sum_squares(x) -> Tensor:
    return tsum(square(x))
