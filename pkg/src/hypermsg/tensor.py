"""Dense 2-D float64 tensors with tape-based reverse-mode differentiation.

Operations are plain functions. When a :class:`Tape` is active and any
input has ``requires_grad``, the op appends a backward closure to the tape;
outside a tape, ops only compute values.

    >>> w = Tensor([[2.0]], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_all(mul(w, w))
    >>> tape.backward(loss)
    >>> w.grad
    array([[4.]])

Forward matrix products use an unblocked contraction so that every output
row depends only on its own input row, bit for bit; segment sums reduce
members in value-sorted order. Together these make message passing exactly
equivariant under node relabeling.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import MissingGradient, NonFiniteValue, NotScalarLoss, ShapeMismatch, ZeroPower

__all__ = [
    "Tensor",
    "Tape",
    "Adam",
    "AdamState",
    "GradCheckReport",
    "as_tensor",
    "set_debug",
    "debug_enabled",
    "canonical_reduction",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "relu",
    "tanh",
    "softplus",
    "exp",
    "log",
    "signed_pow",
    "rowwise_l2_normalize",
    "dropout",
    "mean_rows",
    "sum_all",
    "gather_rows",
    "segment_sum",
    "softmax_cross_entropy",
    "sigmoid_cross_entropy",
    "backward",
    "finite_diff_check",
]

_state = threading.local()
_DEBUG = False
_CANONICAL = True


def set_debug(flag: bool = True):
    """Raise :class:`NonFiniteValue` whenever an op produces NaN or Inf."""
    global _DEBUG
    _DEBUG = bool(flag)


def debug_enabled() -> bool:
    return _DEBUG


@contextlib.contextmanager
def canonical_reduction(enabled: bool):
    """Toggle value-sorted segment reduction. Disabling it is a test-only negative control."""
    global _CANONICAL
    old, _CANONICAL = _CANONICAL, bool(enabled)
    try:
        yield
    finally:
        _CANONICAL = old


class Tensor:
    """A ``(rows, cols)`` float64 matrix with an optional gradient."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch("item() needs a 1x1 tensor")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of backward closures for one forward pass."""

    def __init__(self):
        self._ops: list[Callable[[], None]] = []

    def __enter__(self):
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _state.stack.pop()
        return False

    def __len__(self):
        return len(self._ops)

    def record(self, fn: Callable[[], None]):
        self._ops.append(fn)

    def backward(self, loss: Tensor, params: Iterable[Tensor] = ()):
        """Accumulate d(loss)/d(t) into ``t.grad`` for every recorded input, then clear the tape.

        Tensors in ``params`` that the loss does not reach get a zero gradient.
        """
        if loss.shape != (1, 1):
            raise NotScalarLoss(f"loss must be 1x1, got {loss.shape}")
        loss.grad = np.ones((1, 1)) if loss.grad is None else loss.grad + 1.0
        for fn in reversed(self._ops):
            fn()
        self._ops.clear()
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)


def _current_tape() -> Tape | None:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape | None = None, params: Iterable[Tensor] = ()):
    tape = tape or _current_tape()
    if tape is None:
        raise RuntimeError("no tape recorded this loss")
    tape.backward(loss, params)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    t.grad = g.copy() if t.grad is None else t.grad + g


def _make(data: np.ndarray, parents: tuple, back: Callable[[np.ndarray], None]) -> Tensor:
    if _DEBUG and not np.all(np.isfinite(data)):
        raise NonFiniteValue("operation produced a non-finite value")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out.name = None
    tape = _current_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True

        def run():
            if out.grad is not None:
                back(out.grad)

        tape.record(run)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor):
    (r1, c1), (r2, c2) = a.shape, b.shape
    if (r2 in (r1, 1) and c2 in (c1, 1)) or (r1 in (r2, 1) and c1 in (c2, 1)):
        return
    raise ShapeMismatch(f"cannot combine shapes {a.shape} and {b.shape}")


# -- primitives --------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    # einsum without BLAS: row i of the result depends on row i of a only
    data = np.einsum("ij,jk->ik", a.data, b.data)

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(data, (a, b), back)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)

    def back(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)

    def back(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, -_unbroadcast(g, b.shape))

    return _make(a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    """Elementwise product; either side may be a row or column vector."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)

    def back(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), back)


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _make(a.data * s, (a,), lambda g: _accum(a, g * s))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: _accum(a, g * mask))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: _accum(a, g * (1.0 - y * y)))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    y = np.logaddexp(0.0, x)
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _make(y, (a,), lambda g: _accum(a, g * sig))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: _accum(a, g * y))


def log(a, shift: float = 0.0) -> Tensor:
    """log(a + shift); entries must satisfy a + shift > 0."""
    a = as_tensor(a)
    z = a.data + shift
    return _make(np.log(z), (a,), lambda g: _accum(a, g / z))


def signed_pow(a, p: float) -> Tensor:
    """sgn(x) * |x|**p, elementwise.

    The derivative p*|x|**(p-1) is taken as 0 at x = 0 when p < 1, where the
    true derivative is unbounded.
    """
    a = as_tensor(a)
    p = float(p)
    if p == 0.0:
        raise ZeroPower("signed_pow needs a nonzero exponent")
    x = a.data
    if p == 1.0:
        return _make(x.copy(), (a,), lambda g: _accum(a, g))
    ax = np.abs(x)
    y = np.sign(x) * ax**p

    def back(g):
        if p >= 1.0:
            d = p * ax ** (p - 1.0)
        else:
            nz = ax > 0
            d = np.zeros_like(ax)
            d[nz] = p * ax[nz] ** (p - 1.0)
        _accum(a, g * d)

    return _make(y, (a,), back)


def rowwise_l2_normalize(a, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit L2 norm; rows with norm below ``eps`` pass through unchanged."""
    a = as_tensor(a)
    x = a.data
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))[:, None]
    live = norms >= eps
    safe = np.where(live, norms, 1.0)
    y = x / safe

    def back(g):
        proj = np.einsum("ij,ij->i", y, g)[:, None]
        gx = np.where(live, (g - y * proj) / safe, g)
        _accum(a, gx)

    return _make(y, (a,), back)


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; the identity when not training or ``rate == 0``."""
    a = as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not training or rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * keep, (a,), lambda g: _accum(a, g * keep))


def mean_rows(a) -> Tensor:
    a = as_tensor(a)
    n = a.shape[0]
    return _make(a.data.mean(axis=0, keepdims=True), (a,),
                 lambda g: _accum(a, np.broadcast_to(g / n, a.shape)))


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.array([[a.data.sum()]]), (a,),
                 lambda g: _accum(a, np.broadcast_to(g, a.shape)))


def gather_rows(a, index) -> Tensor:
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)

    def back(g):
        if not a.requires_grad:
            return
        ga = np.zeros_like(a.data)
        for c in range(g.shape[1]):  # per-column bincount is much faster than np.add.at
            ga[:, c] = np.bincount(index, weights=g[:, c], minlength=a.shape[0])
        _accum(a, ga)

    return _make(a.data[index], (a,), back)


def _segment_reduce(x: np.ndarray, segment: np.ndarray, num_segments: int) -> np.ndarray:
    out = np.zeros((num_segments, x.shape[1]))
    if len(segment) == 0:
        return out
    order = np.argsort(segment, kind="stable")
    counts = np.bincount(segment, minlength=num_segments)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    for size in np.unique(counts[counts > 0]):
        groups = np.flatnonzero(counts == size)
        rows = order[starts[groups][:, None] + np.arange(size)]
        block = x[rows]  # (groups, size, cols)
        if _CANONICAL and size > 2:
            block = np.sort(block, axis=1)
        acc = block[:, 0, :].copy()
        for j in range(1, size):
            acc += block[:, j, :]
        out[groups] = acc
    return out


def segment_sum(a, segment, num_segments: int) -> Tensor:
    """Row sums grouped by ``segment``: ``out[s] = sum(a[i] for i with segment[i] == s)``.

    Members of a segment are added in ascending value order (per column), so
    the result is independent of how rows are ordered or labeled.
    """
    a = as_tensor(a)
    segment = np.asarray(segment, dtype=np.int64)
    if len(segment) != a.shape[0]:
        raise ShapeMismatch(f"{len(segment)} segment ids for {a.shape[0]} rows")
    data = _segment_reduce(a.data, segment, num_segments)
    return _make(data, (a,), lambda g: _accum(a, g[segment]))


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row-wise softmax."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if len(labels) != n:
        raise ShapeMismatch(f"{len(labels)} labels for {n} rows")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()

    def back(g):
        probs = np.exp(logp)
        probs[np.arange(n), labels] -= 1.0
        _accum(logits, g[0, 0] * probs / n)

    return _make(np.array([[loss]]), (logits,), back)


def sigmoid_cross_entropy(logits, targets) -> Tensor:
    """Mean elementwise logistic loss against 0/1 ``targets`` of the same shape."""
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=np.float64).reshape(logits.shape)
    x = logits.data
    loss = (np.maximum(x, 0) - x * t + np.log1p(np.exp(-np.abs(x)))).mean()
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _make(np.array([[loss]]), (logits,), lambda g: _accum(logits, g[0, 0] * (sig - t) / t.size))


# -- optimizer -----------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 5e-4
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    """Adam with decoupled weight decay (``theta -= lr * wd * theta``)."""

    def __init__(self, params: Mapping[str, Tensor], lr=0.01, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=5e-4):
        self.params = dict(params)
        self.state = AdamState(lr, betas[0], betas[1], eps, weight_decay)
        for name, p in self.params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        st = self.state
        missing = [n for n, p in self.params.items() if p.grad is None]
        if missing:
            raise MissingGradient(f"no gradient for {missing}")
        st.step += 1
        c1 = 1.0 - st.beta1**st.step
        c2 = 1.0 - st.beta2**st.step
        for name, p in self.params.items():
            g = p.grad
            m = st.m[name] = st.beta1 * st.m[name] + (1.0 - st.beta1) * g
            v = st.v[name] = st.beta2 * st.v[name] + (1.0 - st.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + st.eps)
            p.data = p.data - st.lr * update - st.lr * st.weight_decay * p.data
            p.grad = None


# -- gradient oracle -------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    passed: bool
    checked: int
    worst: tuple | None = None  # (param name, flat index, analytic, numeric)


def finite_diff_check(f: Callable[[], Tensor], params: Mapping[str, Tensor], step: float = 1e-5,
                      tolerance: float = 1e-4) -> GradCheckReport:
    """Compare tape gradients of ``f()`` with central differences, coordinate by coordinate.

    ``f`` must be deterministic and read the current ``data`` of ``params``.
    Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    params = dict(params)
    for p in params.values():
        p.grad = None
        p.requires_grad = True
    with Tape() as tape:
        loss = f()
    tape.backward(loss, params.values())
    worst, max_err, checked = None, 0.0, 0
    for name, p in params.items():
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f().item()
            flat[i] = orig - step
            down = f().item()
            flat[i] = orig
            num = (up - down) / (2.0 * step)
            a = analytic.reshape(-1)[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            checked += 1
            if err > max_err or worst is None:
                max_err, worst = max(err, max_err), (name, i, float(a), float(num))
        p.grad = None
    return GradCheckReport(max_err, tolerance, max_err < tolerance, checked, worst)
