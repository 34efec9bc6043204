"""Dense float64 tensors with reverse-mode automatic differentiation.

Ops compute with numpy and, when an input requires gradients and a Tape is
active, record a backward closure on the innermost tape.  Tapes are rebuilt
per batch (define-by-run), which keeps dynamic-length sequence models simple.
"""

import numpy as np


class NumericsError(Exception):
    """Base class for tensor/optimizer errors."""


class ShapeMismatch(NumericsError):
    """Operands have incompatible shapes (both shapes are in the message)."""


class NonScalarLoss(NumericsError):
    """backward() was called on a tensor that is not a scalar."""


class NonFiniteValue(NumericsError):
    """An op produced NaN/Inf while debug checks were enabled."""


_DEBUG = False


def set_debug(flag):
    """Enable or disable NaN/Inf checking after every op."""
    global _DEBUG
    _DEBUG = bool(flag)


class Tensor:
    """A dense float64 array plus gradient metadata."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        """The single value of a one-element tensor."""
        if self.data.size != 1:
            raise ShapeMismatch(f"item: tensor has shape {self.shape}, not a scalar")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


_TAPES = []


class Tape:
    """Ordered record of executed ops; backward() replays it in reverse."""

    def __init__(self):
        self._entries = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPES.remove(self)
        return False

    def backward(self, loss, params=None):
        """Accumulate gradients of a scalar loss into every tensor on the tape.

        Parameters listed in `params` are guaranteed a gradient afterwards;
        those not on any path to the loss get zeros.
        """
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            shape = loss.shape if isinstance(loss, Tensor) else type(loss)
            raise NonScalarLoss(f"backward: loss must be scalar, got shape {shape}")
        loss.grad = np.ones_like(loss.data)
        for out, backfn in reversed(self._entries):
            if out.grad is not None:
                backfn(out.grad)
        self._entries.clear()
        if params is not None:
            for p in params:
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, requires_grad):
    out = Tensor(data, requires_grad=requires_grad)
    if _DEBUG and not np.all(np.isfinite(out.data)):
        raise NonFiniteValue(f"op produced non-finite values (shape {out.shape})")
    return out


def _record(out, backfn):
    if _TAPES and out.requires_grad:
        _TAPES[-1]._entries.append((out, backfn))


def _accum(t, g):
    if t.requires_grad:
        t.grad = np.array(g, copy=True) if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ------------------------------------------------------------ elementwise ops


def add(a, b):
    """Elementwise sum; broadcasting follows numpy rules."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeMismatch(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, a.requires_grad or b.requires_grad)

    def backfn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    _record(out, backfn)
    return out


def sub(a, b):
    """Elementwise difference a - b."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeMismatch(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, a.requires_grad or b.requires_grad)

    def backfn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    _record(out, backfn)
    return out


def mul(a, b):
    """Elementwise product."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeMismatch(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, a.requires_grad or b.requires_grad)

    def backfn(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    _record(out, backfn)
    return out


def relu(a):
    """max(x, 0)."""
    a = _as_tensor(a)
    out = _make(np.maximum(a.data, 0.0), a.requires_grad)

    def backfn(g):
        _accum(a, g * (a.data > 0.0))

    _record(out, backfn)
    return out


def hinge(a):
    """Hinge nonlinearity max(x, 0); same map as relu."""
    return relu(a)


def tanh(a):
    a = _as_tensor(a)
    data = np.tanh(a.data)
    out = _make(data, a.requires_grad)

    def backfn(g):
        _accum(a, g * (1.0 - data * data))

    _record(out, backfn)
    return out


def sigmoid(a):
    a = _as_tensor(a)
    # overflow-safe form using exp of a nonpositive argument
    z = np.exp(-np.abs(a.data))
    data = np.where(a.data >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = _make(data, a.requires_grad)

    def backfn(g):
        _accum(a, g * data * (1.0 - data))

    _record(out, backfn)
    return out


# ------------------------------------------------------------ linear algebra


def matmul(a, b):
    """Matrix product for 1D/2D operands (no batched matmul)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} must be 1D or 2D")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    out = _make(a.data @ b.data, a.requires_grad or b.requires_grad)

    def backfn(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            _accum(a, g * bd)
            _accum(b, g * ad)
        elif ad.ndim == 1:
            _accum(a, bd @ g)
            _accum(b, np.outer(ad, g))
        elif bd.ndim == 1:
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)
        else:
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)

    _record(out, backfn)
    return out


def concat(tensors, axis=-1):
    """Concatenate along an axis (default: last)."""
    ts = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in ts)
        raise ShapeMismatch(f"concat: shapes {shapes} do not align on axis {axis}")
    out = _make(data, any(t.requires_grad for t in ts))
    ax = axis if axis >= 0 else data.ndim + axis
    splits = np.cumsum([t.data.shape[ax] for t in ts])[:-1]

    def backfn(g):
        for t, piece in zip(ts, np.split(g, splits, axis=ax)):
            _accum(t, piece)

    _record(out, backfn)
    return out


def stack(tensors, axis=0):
    """Stack same-shape tensors along a new axis."""
    ts = [_as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in ts], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in ts)
        raise ShapeMismatch(f"stack: shapes {shapes} are not all equal")
    out = _make(data, any(t.requires_grad for t in ts))

    def backfn(g):
        for i, t in enumerate(ts):
            _accum(t, np.take(g, i, axis=axis))

    _record(out, backfn)
    return out


def transpose(x):
    """Transpose a 2D tensor."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"transpose: input shape {x.shape} is not 2D")
    out = _make(x.data.T.copy(), x.requires_grad)

    def backfn(g):
        _accum(x, g.T)

    _record(out, backfn)
    return out


def narrow(x, axis, start, length):
    """Contiguous slice [start, start+length) along one axis."""
    x = _as_tensor(x)
    if axis < 0 or axis >= x.data.ndim or start < 0 or start + length > x.data.shape[axis]:
        raise ShapeMismatch(
            f"narrow: slice [{start}, {start + length}) on axis {axis} "
            f"exceeds shape {x.shape}"
        )
    sel = tuple(
        slice(start, start + length) if i == axis else slice(None)
        for i in range(x.data.ndim)
    )
    out = _make(x.data[sel].copy(), x.requires_grad)

    def backfn(g):
        gx = np.zeros_like(x.data)
        gx[sel] = g
        _accum(x, gx)

    _record(out, backfn)
    return out


def embedding_lookup(table, indices):
    """Gather rows of a 2D table; backward scatter-adds into the rows."""
    table = _as_tensor(table)
    if table.data.ndim != 2:
        raise ShapeMismatch(f"embedding_lookup: table shape {table.shape} is not 2D")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeMismatch(
            f"embedding_lookup: index out of range for table {table.shape}"
        )
    out = _make(table.data[idx], table.requires_grad)

    def backfn(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx, g)
            _accum(table, gt)

    _record(out, backfn)
    return out


def conv2d(x, kernels, bias=None):
    """Full-width 2D convolution over a T x M input.

    kernels has shape (K, w, M); the output is (T - w + 1, K), one column per
    filter, stride 1, valid padding.
    """
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if x.data.ndim != 2 or kernels.data.ndim != 3:
        raise ShapeMismatch(f"conv2d: got input {x.shape} and kernels {kernels.shape}")
    t_len, m = x.data.shape
    k, w, km = kernels.data.shape
    if km != m or w > t_len:
        raise ShapeMismatch(
            f"conv2d: input {x.shape} incompatible with kernels {kernels.shape}"
        )
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.data.shape != (k,):
            raise ShapeMismatch(f"conv2d: bias {bias.shape} does not match {k} filters")
    win = np.arange(w)[None, :] + np.arange(t_len - w + 1)[:, None]
    flat = x.data[win].reshape(t_len - w + 1, w * m)
    kflat = kernels.data.reshape(k, w * m)
    data = flat @ kflat.T
    if bias is not None:
        data = data + bias.data
    req = x.requires_grad or kernels.requires_grad or (
        bias is not None and bias.requires_grad
    )
    out = _make(data, req)

    def backfn(g):
        if kernels.requires_grad:
            _accum(kernels, (g.T @ flat).reshape(k, w, m))
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, win, (g @ kflat).reshape(-1, w, m))
            _accum(x, gx)
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=0))

    _record(out, backfn)
    return out


def maxpool1d(x):
    """Global max over the first axis of a T x K tensor; ties take the first."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch(f"maxpool1d: input shape {x.shape} is not 2D")
    arg = np.argmax(x.data, axis=0)
    cols = np.arange(x.data.shape[1])
    out = _make(x.data[arg, cols], x.requires_grad)

    def backfn(g):
        gx = np.zeros_like(x.data)
        gx[arg, cols] = g
        _accum(x, gx)

    _record(out, backfn)
    return out


# ------------------------------------------------------------ losses/reductions


def squared_l2_distance(a, b):
    """Sum of squared differences, as a scalar tensor."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(
            f"squared_l2_distance: shapes {a.shape} and {b.shape} differ"
        )
    diff = a.data - b.data
    out = _make(np.sum(diff * diff), a.requires_grad or b.requires_grad)

    def backfn(g):
        _accum(a, 2.0 * g * diff)
        _accum(b, -2.0 * g * diff)

    _record(out, backfn)
    return out


def softmax_cross_entropy(logits, labels):
    """Mean negative log-probability of the true class.

    logits is (K,) with an int label or (B, K) with a length-B label sequence.
    """
    logits = _as_tensor(logits)
    single = logits.data.ndim == 1
    z = logits.data[None, :] if single else logits.data
    if z.ndim != 2:
        raise ShapeMismatch(f"softmax_cross_entropy: logits shape {logits.shape}")
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape != (z.shape[0],):
        raise ShapeMismatch(
            f"softmax_cross_entropy: logits {logits.shape} vs labels {y.shape}"
        )
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise ShapeMismatch(
            f"softmax_cross_entropy: label out of range for {z.shape[1]} classes"
        )
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1))
    rows = np.arange(z.shape[0])
    losses = lse - shifted[rows, y]
    out = _make(np.mean(losses), logits.requires_grad)

    def backfn(g):
        p = np.exp(shifted - lse[:, None])
        p[rows, y] -= 1.0
        gz = g * p / z.shape[0]
        _accum(logits, gz[0] if single else gz)

    _record(out, backfn)
    return out


def reduce_sum(x, axis=None):
    """Sum over all elements (axis=None) or one axis."""
    x = _as_tensor(x)
    out = _make(np.sum(x.data, axis=axis), x.requires_grad)

    def backfn(g):
        if axis is None:
            _accum(x, g * np.ones_like(x.data))
        else:
            _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape))

    _record(out, backfn)
    return out


def reduce_mean(x, axis=None):
    """Mean over all elements (axis=None) or one axis."""
    x = _as_tensor(x)
    out = _make(np.mean(x.data, axis=axis), x.requires_grad)
    n = x.data.size if axis is None else x.data.shape[axis]

    def backfn(g):
        if axis is None:
            _accum(x, g * np.ones_like(x.data) / n)
        else:
            _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape) / n)

    _record(out, backfn)
    return out
