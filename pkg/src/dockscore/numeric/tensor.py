"""Dense float64 tensors with reverse-mode automatic differentiation.

Every op validates shapes, checks outputs for NaN/Inf, and (when any input
requires gradients) records a tape node holding a backward closure. The tape
is a DAG of `TapeNode`s; `backward()` on a scalar walks it once in reverse
topological order, accumulating gradients into `.grad` buffers.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import NonFiniteError, ShapeError, TapeError
from .rng import SeededRng


class TapeNode:
    """One recorded op: inputs and a closure computing input gradients."""

    __slots__ = ("op", "inputs", "backward", "consumed")

    def __init__(self, op, inputs, backward):
        self.op = op
        self.inputs = inputs
        self.backward = backward
        self.consumed = False


class Tensor:
    """Row-major float64 array, optionally tracked by the autodiff tape.

    Data is treated as immutable once wrapped; only `.grad` buffers mutate
    (and parameter updates via the optimizer, between tape lifetimes).
    """

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar used by tests and small expressions; model code calls
    # the module-level functions directly.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finite_or_raise(arr: np.ndarray, op: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"op '{op}' produced non-finite values")


def _make(data: np.ndarray, op: str, inputs, backward_fn) -> Tensor:
    _finite_or_raise(data, op)
    out = Tensor(data)
    if any(t.requires_grad or t.node is not None for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op, tuple(inputs), backward_fn)
    return out


def backward(loss: Tensor):
    """Populate `.grad` of every tracked tensor reachable from `loss`.

    Gradients accumulate across multiple uses of the same tensor. The tape
    is single-use: a second call through the same nodes raises TapeError.
    """
    if loss.data.size != 1:
        raise TapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss.node is not None and loss.node.consumed:
        raise TapeError("tape already consumed by a previous backward pass")

    # Reverse topological order via iterative post-order DFS.
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            if t.node.consumed:
                raise TapeError("tape already consumed by a previous backward pass")
            for inp in t.node.inputs:
                if id(inp) not in seen:
                    stack.append((inp, False))

    loss.grad = np.ones_like(loss.data)
    for t in reversed(order):
        if t.node is None or t.grad is None:
            continue
        grads = t.node.backward(t.grad)
        t.node.consumed = True
        for inp, g in zip(t.node.inputs, grads):
            if g is None or not (inp.requires_grad or inp.node is not None):
                continue
            if inp.grad is None:
                inp.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                inp.grad += g


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back to the original operand shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise / linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes {a.data.shape} x {b.data.shape} do not conform")
    out = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, "matmul", (a, b), bwd)


def _binary(op, a, b, fwd, bwd_a, bwd_b):
    try:
        out = fwd(a.data, b.data)
    except ValueError as e:
        raise ShapeError(f"{op} shapes {a.data.shape} / {b.data.shape}: {e}") from None

    def bwd(g):
        return (_unbroadcast(bwd_a(g), a.data.shape),
                _unbroadcast(bwd_b(g), b.data.shape))

    return _make(out, op, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", a, b, np.add, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", a, b, np.subtract, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary("mul", a, b, np.multiply,
                   lambda g: g * b.data, lambda g: g * a.data)


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, "scalar-mul", (a,), lambda g: (g * c,))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects 2-D, got {a.data.shape}")
    return _make(a.data.T.copy(), "transpose", (a,), lambda g: (g.T,))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.array_split(g, splits, axis=axis))

    return _make(out, "concat", tensors, bwd)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"slice axis {axis} out of range for {a.data.shape}")
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = a.data[idx].copy()

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return _make(out, "slice", (a,), bwd)


# ---------------------------------------------------------------------------
# unary nonlinearities
# ---------------------------------------------------------------------------

def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.log(a.data)
    return _make(out, "log", (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def bwd(g):
        return (g * 0.5 / out,)

    return _make(out, "sqrt", (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    return _make(out, "relu", (a,), lambda g: (g * (a.data > 0),))


def elu(a: Tensor) -> Tensor:
    out = np.where(a.data > 0, a.data, np.expm1(a.data))

    def bwd(g):
        return (g * np.where(a.data > 0, 1.0, out + 1.0),)

    return _make(out, "elu", (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def signed_root(a: Tensor, n: int, eps: float = 1e-8) -> Tensor:
    """Odd n-th root x -> sign(x)|x|^(1/n), smoothed near zero.

    Computed as x * (|x|+eps)^(1/n - 1), which is continuous through zero
    and has bounded derivative (|x|+eps)^(1/n - 2) * (|x|/n + eps).
    """
    if n < 1:
        raise ShapeError("signed_root needs n >= 1")
    t = np.abs(a.data) + eps
    out = a.data * t ** (1.0 / n - 1.0)

    def bwd(g):
        return (g * t ** (1.0 / n - 2.0) * (np.abs(a.data) / n + eps),)

    return _make(out, "signed-root", (a,), bwd)


# ---------------------------------------------------------------------------
# softmax / normalization
# ---------------------------------------------------------------------------

def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along `axis`; optional boolean mask of valid positions.

    Rows whose mask is all-False get all-zero probabilities and trigger a
    warning rather than NaNs.
    """
    x = a.data
    if mask is None:
        mx = np.max(x, axis=axis, keepdims=True)
        e = np.exp(x - mx)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        neg = np.where(mask, x, -np.inf)
        mx = np.max(neg, axis=axis, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        e = np.where(mask, np.exp(x - mx), 0.0)
    s = np.sum(e, axis=axis, keepdims=True)
    dead = s == 0
    if np.any(dead):
        warnings.warn("softmax over fully-masked row(s); returning zeros", RuntimeWarning)
    p = e / np.where(dead, 1.0, s)

    def bwd(g):
        inner = np.sum(g * p, axis=axis, keepdims=True)
        return (p * (g - inner),)

    return _make(p, "softmax", (a,), bwd)


def layer_norm(a: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean / unit variance along `axis` (no affine)."""
    x = a.data
    n = x.shape[axis]
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def bwd(g):
        gm = g.mean(axis=axis, keepdims=True)
        gym = (g * y).mean(axis=axis, keepdims=True)
        return (inv * (g - gm - y * gym),)

    del n
    return _make(y, "layer-norm", (a,), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    out = a.data.sum(axis=axis)

    def bwd(g):
        if axis is None:
            return (np.full_like(a.data, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return _make(np.asarray(out), "reduce-sum", (a,), bwd)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    out = a.data.mean(axis=axis)

    def bwd(g):
        if axis is None:
            return (np.full_like(a.data, float(g) / count),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape) / count,)

    return _make(np.asarray(out), "reduce-mean", (a,), bwd)


def _reduce_extreme(a: Tensor, axis, op: str):
    fn = np.max if op == "reduce-max" else np.min
    out = fn(a.data, axis=axis)

    def bwd(g):
        if axis is None:
            flat = a.data.reshape(-1)
            grad = np.zeros_like(flat)
            grad[int(np.argmax(flat == out))] = float(g)
            return (grad.reshape(a.data.shape),)
        expanded = np.expand_dims(out, axis)
        hit = a.data == expanded
        first = np.argmax(hit, axis=axis)
        grad = np.zeros_like(a.data)
        np.put_along_axis(grad, np.expand_dims(first, axis),
                          np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return _make(np.asarray(out), op, (a,), bwd)


def reduce_max(a: Tensor, axis: int | None = None) -> Tensor:
    return _reduce_extreme(a, axis, "reduce-max")


def reduce_min(a: Tensor, axis: int | None = None) -> Tensor:
    return _reduce_extreme(a, axis, "reduce-min")


# ---------------------------------------------------------------------------
# segment reductions (rows grouped by integer id)
# ---------------------------------------------------------------------------

def _segment_plan(seg: np.ndarray, num_segments: int):
    """Return (order, sorted_seg, starts, counts); order is None when sorted."""
    order = None
    if seg.size and np.any(np.diff(seg) < 0):
        order = np.argsort(seg, kind="stable")
        seg = seg[order]
    starts = np.searchsorted(seg, np.arange(num_segments))
    counts = np.diff(np.append(starts, seg.size))
    return order, seg, starts, counts


def _check_segments(values: np.ndarray, seg: np.ndarray, num_segments: int):
    if values.ndim != 2:
        raise ShapeError(f"segment reduce expects 2-D rows, got {values.shape}")
    if seg.shape != (values.shape[0],):
        raise ShapeError(f"segment ids {seg.shape} do not match rows {values.shape}")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise ShapeError("segment id out of range")


def _reduceat(ufunc, values, starts, counts):
    """Segmented reduction over pre-sorted rows; empty segments yield zeros."""
    out = np.zeros((len(counts), values.shape[1]))
    nonempty = np.flatnonzero(counts)
    if values.shape[0] and nonempty.size:
        out[nonempty] = ufunc.reduceat(values, starts[nonempty], axis=0)
    return out


def segment_reduce(a: Tensor, segment_ids, num_segments: int, kind: str = "sum") -> Tensor:
    """Reduce rows of `a` sharing a segment id. Empty segments yield zeros.

    Kinds: sum, mean, max, min, prod. Used for per-graph pooling and
    per-node neighbor aggregation.
    """
    seg = np.asarray(segment_ids, dtype=np.int64)
    _check_segments(a.data, seg, num_segments)
    order, sseg, starts, counts = _segment_plan(seg, num_segments)
    vals = a.data if order is None else a.data[order]

    if kind == "sum":
        out = _reduceat(np.add, vals, starts, counts)

        def bwd(g):
            return (g[seg],)

    elif kind == "mean":
        out = _reduceat(np.add, vals, starts, counts)
        denom = np.maximum(counts, 1)[:, None]
        out = out / denom

        def bwd(g):
            return ((g / denom)[seg],)

    elif kind in ("max", "min"):
        ufunc = np.maximum if kind == "max" else np.minimum
        out = _reduceat(ufunc, vals, starts, counts)

        def bwd(g):
            m = a.data.shape[0]
            hit = a.data == out[seg]
            rowidx = np.where(hit, np.arange(m)[:, None], m)
            if order is not None:
                rowidx = rowidx[order]
            first = _reduceat(np.minimum, rowidx.astype(np.float64), starts, counts)
            first[counts == 0] = m
            first = first.astype(np.int64)
            grad = np.zeros_like(a.data)
            valid = first < m
            rows = first[valid]
            cols = np.broadcast_to(np.arange(a.data.shape[1]), first.shape)[valid]
            grad[rows, cols] = g[valid]
            return (grad,)

    elif kind == "prod":
        out = _reduceat(np.multiply, vals, starts, counts)

        def bwd(g):
            x = a.data
            zero = x == 0.0
            zf = zero.astype(np.float64)
            nzero = _reduceat(np.add, zf if order is None else zf[order],
                              starts, counts)
            # product of the non-zero entries, used when exactly one zero
            safe = np.where(zero, 1.0, x)
            prod_nz = _reduceat(np.multiply, safe if order is None else safe[order],
                                starts, counts)
            gs = g[seg]
            nz_s = nzero[seg]
            with np.errstate(divide="ignore", invalid="ignore"):
                base = np.where(zero, 0.0, out[seg] / np.where(zero, 1.0, x))
            grad = np.where(nz_s == 0, gs * base,
                            np.where((nz_s == 1) & zero, gs * prod_nz[seg], 0.0))
            return (grad,)

    else:
        raise ShapeError(f"unknown segment reduce kind '{kind}'")

    return _make(out, f"segment-{kind}", (a,), bwd)


def gather_rows(a: Tensor, index) -> Tensor:
    """Rows of `a` selected by an integer index vector (with repeats)."""
    idx = np.asarray(index, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"gather-rows expects 2-D, got {a.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise ShapeError("gather index out of range")
    out = a.data[idx]

    def bwd(g):
        grad = np.zeros_like(a.data)
        if idx.size:
            order = np.argsort(idx, kind="stable")
            sidx = idx[order]
            uniq, starts = np.unique(sidx, return_index=True)
            grad[uniq] = np.add.reduceat(g[order], starts, axis=0)
        return (grad,)

    return _make(out, "gather-rows", (a,), bwd)


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------

def dropout(a: Tensor, p: float, training: bool, rng: SeededRng | None = None) -> Tensor:
    """Inverted dropout: train-time scaling by 1/(1-p), identity at inference."""
    if not 0.0 <= p < 1.0:
        raise ShapeError(f"dropout rate {p} outside [0, 1)")
    if not training or p == 0.0:
        return a
    if rng is None:
        raise ShapeError("dropout with training=True requires an rng")
    keep = (rng.uniform(size=a.data.shape) >= p) / (1.0 - p)
    return _make(a.data * keep, "dropout", (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# generic dispatch
# ---------------------------------------------------------------------------

def forward_op(kind: str, inputs, **attrs) -> Tensor:
    """Dispatch an op by name; `inputs` is a sequence of Tensors."""
    inputs = list(inputs)
    single = inputs[0] if inputs else None
    table = {
        "matmul": lambda: matmul(inputs[0], inputs[1]),
        "add": lambda: add(inputs[0], inputs[1]),
        "sub": lambda: sub(inputs[0], inputs[1]),
        "elementwise-mul": lambda: mul(inputs[0], inputs[1]),
        "scalar-mul": lambda: scalar_mul(single, attrs["c"]),
        "concat": lambda: concat(inputs, axis=attrs.get("axis", 0)),
        "slice": lambda: slice_axis(single, attrs["axis"], attrs["start"], attrs["stop"]),
        "transpose": lambda: transpose(single),
        "exp": lambda: exp(single),
        "log": lambda: log(single),
        "sqrt": lambda: sqrt(single),
        "relu": lambda: relu(single),
        "elu": lambda: elu(single),
        "tanh": lambda: tanh(single),
        "sigmoid": lambda: sigmoid(single),
        "signed-root": lambda: signed_root(single, attrs["n"], attrs.get("eps", 1e-8)),
        "softmax": lambda: softmax(single, axis=attrs.get("axis", -1),
                                   mask=attrs.get("mask")),
        "layer-norm": lambda: layer_norm(single, axis=attrs.get("axis", -1),
                                         eps=attrs.get("eps", 1e-5)),
        "dropout": lambda: dropout(single, attrs["p"], attrs["training"],
                                   attrs.get("rng")),
        "gather-rows": lambda: gather_rows(single, attrs["index"]),
    }
    for red in ("sum", "mean", "max", "min"):
        table[f"reduce-{red}"] = (lambda r=red: globals()[f"reduce_{r}"](
            single, axis=attrs.get("axis")))
    for red in ("sum", "mean", "max", "min", "prod"):
        table[f"segment-reduce-{red}"] = (lambda r=red: segment_reduce(
            single, attrs["segment_ids"], attrs["num_segments"], r))
    if kind not in table:
        raise ShapeError(f"unknown op kind '{kind}'")
    return table[kind]()
