"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations executed while a :class:`Tape` is active, and that touch at
least one tensor with ``requires_grad``, are appended to that tape.
:func:`backward` walks the tape in reverse and accumulates cotangents into
``.grad``. Outside a tape the same functions just compute values, which
is what inference uses.

    with Tape() as tape:
        loss = model.loss(batch)
        backward(loss, tape)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor", "Parameter", "Tape", "backward",
    "ShapeMismatch", "DegenerateBatch", "NoTape", "CheckpointError",
    "matmul", "add", "broadcast_add", "elementwise_mul", "concat", "stack",
    "mean_rows", "mean_cols", "masked_mean", "total",
    "relu", "sigmoid", "softmax_vec", "log", "transpose", "embedding", "scatter_add",
    "conv1d", "pwconv", "tconv_channels", "batchnorm", "BatchNormState",
    "Adam", "adam_step", "save_checkpoint", "load_checkpoint",
]


class ShapeMismatch(ValueError):
    pass


class DegenerateBatch(ValueError):
    pass


class NoTape(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


_TAPES: list["Tape"] = []


class Tape:
    """Records differentiable operations; single writer."""

    def __init__(self) -> None:
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def reset(self) -> None:
        self.records.clear()


def _active_tape() -> Optional[Tape]:
    return _TAPES[-1] if _TAPES else None


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")
    __array_priority__ = 100  # make ndarray (op) Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64, copy=True) if not isinstance(
            data, np.ndarray) or data.dtype != np.float64 else data
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return _broadcast_binary(self, other, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return _broadcast_binary(self, other, "sub")

    def __rsub__(self, other):
        return _broadcast_binary(as_tensor(other), self, "sub")

    def __mul__(self, other):
        return _broadcast_binary(self, other, "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return _broadcast_binary(self, -1.0, "mul")

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return _getitem(self, idx)

    def reshape(self, *shape) -> "Tensor":
        return _reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def sum(self) -> "Tensor":
        return total(self)


def _raise_not_scalar():
    raise ShapeMismatch("item() requires a single-element tensor")


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _record(data: np.ndarray, parents: Sequence[Tensor], fn: Callable) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    tape = _active_tape()
    if requires and tape is not None:
        tape.records.append((out, tuple(parents), fn))
    return out


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """Propagate d(loss)/d(x) into ``x.grad`` for every tensor on the tape."""
    tape = tape if tape is not None else _active_tape()
    if tape is None or not tape.records:
        raise NoTape("backward() needs a non-empty tape")
    if loss.size != 1:
        raise ShapeMismatch(f"loss must be scalar, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.data)
    for out, parents, fn in reversed(tape.records):
        if out.grad is None:
            continue
        grads = fn(out.grad)
        for p, g in zip(parents, grads):
            if g is None or not p.requires_grad:
                continue
            if g.shape != p.shape:
                raise ShapeMismatch(f"internal: cotangent {g.shape} for tensor {p.shape}")
            p.grad = g.copy() if p.grad is None else p.grad + g


# -- elementwise and structural ops -------------------------------------------


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_binary(a, b, op: str) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        if op == "add":
            data = a.data + b.data
        elif op == "sub":
            data = a.data - b.data
        else:
            data = a.data * b.data
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}") from exc
    ad, bd = a.data, b.data

    def fn(g):
        if op == "add":
            return _unbroadcast(g, ad.shape), _unbroadcast(g, bd.shape)
        if op == "sub":
            return _unbroadcast(g, ad.shape), _unbroadcast(-g, bd.shape)
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _record(data, (a, b), fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Same-shape addition."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    return _broadcast_binary(a, b, "add")


def broadcast_add(x: Tensor, row: Tensor) -> Tensor:
    """Add ``row`` to every slice of ``x`` along its leading axis."""
    if row.shape not in (x.shape[1:], (1,) + x.shape[1:]):
        raise ShapeMismatch(f"broadcast_add: {x.shape} vs {row.shape}")
    return _broadcast_binary(x, row, "add")


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"elementwise_mul: {a.shape} vs {b.shape}")
    return _broadcast_binary(a, b, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def fn(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 2:
            return np.outer(g, bd), ad.T @ g
        if bd.ndim == 2:
            return bd @ g, np.outer(ad, g)
        return g * bd, g * ad

    return _record(ad @ bd, (a, b), fn)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeMismatch("transpose expects a matrix")
    return _record(a.data.T.copy(), (a,), lambda g: (g.T,))


def _reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def _getitem(a: Tensor, idx) -> Tensor:
    shape = a.shape

    def fn(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _record(np.array(a.data[idx]), (a,), fn)


def embedding(table: Tensor, indices) -> Tensor:
    """Row lookup ``table[indices]``; any index array shape."""
    return _getitem(table, np.asarray(indices, dtype=np.int64))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def fn(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _record(data, tensors, fn)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors])
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _record(data, tensors, lambda g: tuple(g[i] for i in range(len(tensors))))


def total(a: Tensor) -> Tensor:
    shape = a.shape
    return _record(np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def mean_rows(x: Tensor) -> Tensor:
    """Mean of each row of a matrix (length = number of rows)."""
    if x.ndim != 2:
        raise ShapeMismatch("mean_rows expects a matrix")
    n_rows, n_cols = x.shape
    return _record(x.data.mean(axis=1), (x,),
                   lambda g: (np.repeat(g[:, None] / n_cols, n_cols, axis=1),))


def mean_cols(x: Tensor) -> Tensor:
    """Mean of each column of a matrix, i.e. average pooling over positions."""
    if x.ndim != 2:
        raise ShapeMismatch("mean_cols expects a matrix")
    n_rows, n_cols = x.shape
    return _record(x.data.mean(axis=0), (x,),
                   lambda g: (np.repeat(g[None, :] / n_rows, n_rows, axis=0),))


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over the position axis of a ``B x L x C`` batch, counting only ``mask`` rows."""
    m = mask.astype(np.float64)[..., None]
    counts = m.sum(axis=1)
    if np.any(counts == 0):
        raise DegenerateBatch("masked_mean over an empty sequence")
    data = (x.data * m).sum(axis=1) / counts
    return _record(data, (x,), lambda g: ((g / counts)[:, None, :] * m,))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return _record(np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,))


def _sigmoid_np(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    neg = z < 0
    out[~neg] = 1.0 / (1.0 + np.exp(-z[~neg]))
    e = np.exp(z[neg])
    out[neg] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid_np(x.data)
    return _record(s, (x,), lambda g: (g * s * (1.0 - s),))


def softmax_vec(x: Tensor) -> Tensor:
    if x.ndim != 1:
        raise ShapeMismatch("softmax_vec expects a vector")
    e = np.exp(x.data - x.data.max())
    y = e / e.sum()
    return _record(y, (x,), lambda g: (y * (g - np.dot(g, y)),))


def log(x: Tensor) -> Tensor:
    xd = x.data
    return _record(np.log(xd), (x,), lambda g: (g / xd,))


def scatter_add(h: Tensor, src: np.ndarray, dst: np.ndarray, n_out: int) -> Tensor:
    """``out[dst[e]] += h[src[e]]`` for every edge ``e``."""
    out = np.zeros((n_out,) + h.shape[1:])
    np.add.at(out, dst, h.data[src])

    def fn(g):
        gh = np.zeros(h.shape)
        np.add.at(gh, src, g[dst])
        return (gh,)

    return _record(out, (h,), fn)


# -- convolutions -------------------------------------------------------------


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    return (x[None], True) if x.ndim == 2 else (x, False)


def conv1d(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Stride-1 same-padded 1D convolution.

    Args:
        x: ``l x c_in`` or ``B x l x c_in``.
        w: ``k x c_in x c_out`` with odd ``k``.
        b: optional ``c_out`` bias.
    """
    k, c_in, c_out = w.shape
    if k % 2 == 0:
        raise ShapeMismatch("conv1d kernel size must be odd")
    xd, squeezed = _as_batch(x.data)
    if xd.ndim != 3 or xd.shape[2] != c_in:
        raise ShapeMismatch(f"conv1d: input {x.shape} vs kernel {w.shape}")
    B, length, _ = xd.shape
    p = (k - 1) // 2
    xp = np.pad(xd, ((0, 0), (p, p), (0, 0)))
    win = sliding_window_view(xp, k, axis=1)  # B x l x c_in x k
    out = np.einsum("blck,kco->blo", win, w.data, optimize=True)
    parents: list[Tensor] = [x, w]
    if b is not None:
        out = out + b.data
        parents.append(b)
    wd = w.data

    def fn(g):
        gb = g[None] if squeezed else g
        gw = np.einsum("blck,blo->kco", win, gb, optimize=True)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, j:j + length, :] += gb @ wd[j].T
        gx = gxp[:, p:p + length, :]
        grads = [gx[0] if squeezed else gx, gw]
        if b is not None:
            grads.append(gb.sum(axis=(0, 1)))
        return tuple(grads)

    return _record(out[0] if squeezed else out, parents, fn)


def pwconv(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Point-wise (kernel 1) convolution: a per-position linear map on the last axis."""
    c_in, c_out = w.shape
    if x.shape[-1] != c_in:
        raise ShapeMismatch(f"pwconv: input {x.shape} vs weight {w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    parents: list[Tensor] = [x, w]
    if b is not None:
        out = out + b.data
        parents.append(b)

    def fn(g):
        gw = xd.reshape(-1, c_in).T @ g.reshape(-1, c_out)
        grads = [g @ wd.T, gw]
        if b is not None:
            grads.append(g.reshape(-1, c_out).sum(axis=0))
        return tuple(grads)

    return _record(out, parents, fn)


def tconv_channels(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Kernel-1, stride-1 transposed convolution, i.e. a channel up-projection.

    With kernel 1 and stride 1 a transposed convolution is the same
    per-position linear map as :func:`pwconv`; sequence length is unchanged.
    """
    return pwconv(x, w, b)


# -- batch normalisation -------------------------------------------------------


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels), np.ones(channels))


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """Per-channel normalisation over every position (and batch item) of ``x``.

    ``x`` is ``n x c`` or ``B x l x c``; ``mask`` (``B x l``) marks real
    positions in a padded batch. Padded positions come out as zero and do not
    enter the statistics. Training mode normalises with the batch moments
    and moves the running moments by ``momentum`` (the running variance uses
    the unbiased estimate); eval mode uses the running moments.
    """
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatch("batchnorm: gamma/beta must match the channel count")
    xd = x.data
    if mask is None:
        m = np.ones(xd.shape[:-1] + (1,))
    else:
        m = mask.astype(np.float64)[..., None]
        if m.shape[:-1] != xd.shape[:-1]:
            raise ShapeMismatch("batchnorm: mask does not match input")
    axes = tuple(range(xd.ndim - 1))
    n = m.sum()
    gd = gamma.data

    if training:
        if n < 2:
            raise DegenerateBatch("batchnorm in train mode needs at least two positions")
        mean = (xd * m).sum(axis=axes) / n
        xc = (xd - mean) * m
        var = (xc * xc).sum(axis=axes) / n
        inv = 1.0 / np.sqrt(var + state.eps)
        xhat = xc * inv
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mean
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * var * n / (n - 1)

        def fn(g):
            g = g * m
            gxhat = g * gd
            s1 = gxhat.sum(axis=axes)
            s2 = (gxhat * xhat).sum(axis=axes)
            gx = inv / n * (n * gxhat - s1 - xhat * s2) * m
            return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)
    else:
        inv = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (xd - state.running_mean) * inv * m

        def fn(g):
            g = g * m
            return g * gd * inv, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    out = (xhat * gd + beta.data) * m
    return _record(out, (x, gamma, beta), fn)


# -- optimisation ---------------------------------------------------------------


@dataclass
class Adam:
    """Adam with bias correction; moments keyed by parameter name."""

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: Iterable[Parameter]) -> None:
        adam_step(list(params), self)

    @staticmethod
    def zero_grad(params: Iterable[Parameter]) -> None:
        for p in params:
            p.grad = None


def adam_step(params: Sequence[Parameter], state: Adam) -> None:
    """One bias-corrected Adam update of every parameter that has a gradient."""
    b1, b2 = state.betas
    state.step_count += 1
    t = state.step_count
    for p in params:
        if p.grad is None:
            continue
        g = p.grad
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        state.m[p.name], state.v[p.name] = m, v
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# -- checkpoint format -------------------------------------------------------------

MAGIC = b"HGDT"
FORMAT_VERSION = 1


def _write_array(buf: bytearray, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    buf += struct.pack("<I", len(raw)) + raw
    buf += struct.pack("<I", arr.ndim)
    buf += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    buf += np.ascontiguousarray(arr, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self) -> tuple[str, np.ndarray]:
        name = self.take(self.u32()).decode("utf-8")
        rank = self.u32()
        dims = struct.unpack(f"<{rank}Q", self.take(8 * rank)) if rank else ()
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(dims)
        return name, arr


def save_checkpoint(
    path,
    tensors: dict[str, np.ndarray],
    metadata: Optional[dict] = None,
    optimizer: Optional[Adam] = None,
) -> None:
    """Write the ``HGDT`` binary checkpoint (layout documented in docs/checkpoint_format.md)."""
    buf = bytearray(MAGIC)
    buf += struct.pack("<I", FORMAT_VERSION)
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    buf += struct.pack("<I", len(meta)) + meta
    buf += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        _write_array(buf, name, np.asarray(arr, dtype=np.float64))
    if optimizer is None:
        buf += struct.pack("<I", 0)
    else:
        buf += struct.pack("<I", 1)
        buf += struct.pack("<Q", optimizer.step_count)
        buf += struct.pack("<4d", optimizer.lr, *optimizer.betas, optimizer.eps)
        names = sorted(optimizer.m)
        buf += struct.pack("<I", 2 * len(names))
        for name in names:
            _write_array(buf, "m/" + name, optimizer.m[name])
            _write_array(buf, "v/" + name, optimizer.v[name])
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict, Optional[Adam]]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(4) != MAGIC:
        raise CheckpointError("not an HGDT checkpoint")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    metadata = json.loads(r.take(r.u32()).decode("utf-8"))
    tensors = dict(r.array() for _ in range(r.u32()))
    optimizer = None
    if r.u32():
        step = r.u64()
        lr, b1, b2, eps = struct.unpack("<4d", r.take(32))
        optimizer = Adam(lr=lr, betas=(b1, b2), eps=eps, step_count=step)
        for _ in range(r.u32()):
            name, arr = r.array()
            kind, pname = name.split("/", 1)
            (optimizer.m if kind == "m" else optimizer.v)[pname] = arr
    if r.pos != len(r.data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return tensors, metadata, optimizer
