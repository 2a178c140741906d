"""Dense float64 tensors and reverse-mode differentiation on an explicit tape.

Deliberately small: just enough primitives for a feed-forward encoder, the
supervision losses, and input-space gradients for attacks. Shapes are strict;
the only broadcast allowed is a row bias-add. Every primitive has a forward
and a backward rule, and the backward rules are exact partial derivatives
(checked against central finite differences in the test suite).
"""

from __future__ import annotations

import numpy as np

from . import backends


class NumericsError(ValueError):
    """Shape mismatch or invalid operand for a tape primitive."""


def _arr(data) -> np.ndarray:
    # note: order="C" keeps 0-d arrays 0-d, unlike ascontiguousarray
    return np.asarray(data, dtype=np.float64, order="C")


class Tensor:
    """Float64 array plus an accumulated gradient slot.

    Leaves created with requires_grad=True (parameters, attack inputs)
    receive gradients on Tape.backward; other leaves are treated as
    constants.
    """

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _arr(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive applications enabling reverse passes.

    Each record holds the output tensor, the input tensors, and a closure
    mapping the output gradient to input gradients. backward() walks the
    records last-to-first, accumulating into .grad of intermediates and of
    leaves with requires_grad set.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self._produced: set[int] = set()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward):
        self._records.append((out, inputs, backward))
        self._produced.add(id(out))

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(leaf) for every requires_grad leaf on the tape."""
        if loss.data.size != 1:
            raise NumericsError(
                f"backward requires a scalar output, got shape {loss.data.shape}"
            )
        loss.grad = np.ones_like(loss.data)
        for out, inputs, bwd in reversed(self._records):
            if out.grad is None:
                continue
            grads = bwd(out.grad)
            for inp, g in zip(inputs, grads):
                if g is None:
                    continue
                if not (inp.requires_grad or id(inp) in self._produced):
                    continue
                if inp.grad is None:
                    # own a copy: backward closures may return views of the
                    # upstream gradient (e.g. add passes g straight through)
                    inp.grad = g.copy()
                else:
                    inp.grad += g


def _check_2d(name: str, *tensors: Tensor):
    for t in tensors:
        if t.data.ndim != 2:
            raise NumericsError(f"{name} expects 2-D operands, got shape {t.data.shape}")


def _check_same_shape(name: str, a: Tensor, b: Tensor):
    if a.data.shape != b.data.shape:
        raise NumericsError(f"{name} shape mismatch: {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# primitives


def matmul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _check_2d("matmul", a, b)
    if a.data.shape[1] != b.data.shape[0]:
        raise NumericsError(f"matmul shape mismatch: {a.data.shape} x {b.data.shape}")
    k = backends.active()
    out = Tensor(k.matmul_fwd(a.data, b.data))

    def backward(g):
        return k.matmul_bwd(g, a.data, b.data)

    tape.record(out, (a, b), backward)
    return out


def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    """Same-shape add, or row bias-add when b is 1-D matching a's columns."""
    bias = b.data.ndim == 1 and a.data.ndim == 2 and a.data.shape[1] == b.data.shape[0]
    if not bias:
        _check_same_shape("add", a, b)
    out = Tensor(a.data + b.data)

    def backward(g):
        return g, g.sum(axis=0) if bias else g

    tape.record(out, (a, b), backward)
    return out


def sub(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    out = Tensor(a.data - b.data)
    tape.record(out, (a, b), lambda g: (g, -g))
    return out


def mul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data)
    tape.record(out, (a, b), lambda g: (g * b.data, g * a.data))
    return out


def scale(tape: Tape, a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.data * c)
    tape.record(out, (a,), lambda g: (g * c,))
    return out


def neg(tape: Tape, a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    tape.record(out, (a,), lambda g: (-g,))
    return out


def relu(tape: Tape, a: Tensor) -> Tensor:
    _check_2d("relu", a)
    k = backends.active()
    out = Tensor(k.relu_fwd(a.data))
    tape.record(out, (a,), lambda g: (k.relu_bwd(g, a.data),))
    return out


def dense(tape: Tape, x: Tensor, w: Tensor, b: Tensor, activate: bool = True) -> Tensor:
    """Fused affine layer x @ w + b with optional ReLU.

    Semantically identical to matmul + add + relu; recorded as one tape node
    so the hot encoder path touches fewer intermediates.
    """
    _check_2d("dense", x, w)
    if x.data.shape[1] != w.data.shape[0] or b.data.shape != (w.data.shape[1],):
        raise NumericsError(
            f"dense shape mismatch: x {x.data.shape}, w {w.data.shape}, "
            f"b {b.data.shape}"
        )
    k = backends.active()
    out_arr = k.dense_fwd(x.data, w.data, b.data, activate)
    out = Tensor(out_arr)

    def backward(g):
        return k.dense_bwd(g, x.data, w.data, out_arr, activate)

    tape.record(out, (x, w, b), backward)
    return out


def l2_normalize(tape: Tape, a: Tensor) -> Tensor:
    """Normalize each row to unit l2 norm. Rows must be nonzero."""
    _check_2d("l2_normalize", a)
    k = backends.active()
    z, norms = k.l2norm_fwd(a.data)
    if np.any(norms < 1e-12):
        raise NumericsError("l2_normalize: zero row")
    out = Tensor(z)
    tape.record(out, (a,), lambda g: (k.l2norm_bwd(g, z, norms),))
    return out


def logsumexp(tape: Tape, a: Tensor) -> Tensor:
    """Row-wise log of the softmax partition sum: (B, N) -> (B,)."""
    _check_2d("logsumexp", a)
    k = backends.active()
    lse = k.logsumexp_fwd(a.data)
    out = Tensor(lse)
    tape.record(out, (a,), lambda g: (k.logsumexp_bwd(g, a.data, lse),))
    return out


def exp(tape: Tape, a: Tensor) -> Tensor:
    out = Tensor(np.exp(a.data))
    tape.record(out, (a,), lambda g: (g * out.data,))
    return out


def square(tape: Tape, a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data)
    tape.record(out, (a,), lambda g: (2.0 * a.data * g,))
    return out


def arccos(tape: Tape, a: Tensor) -> Tensor:
    """Elementwise arccos; inputs are clipped to [-1, 1].

    The derivative is singular at the endpoints; it is clamped there, so
    gradients are exact only in the open interval.
    """
    x = np.clip(a.data, -1.0, 1.0)
    out = Tensor(np.arccos(x))

    def backward(g):
        return (-g / np.sqrt(np.maximum(1.0 - x * x, 1e-24)),)

    tape.record(out, (a,), backward)
    return out


def maximum_scalar(tape: Tape, a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(np.maximum(a.data, c))
    tape.record(out, (a,), lambda g: (g * (a.data > c),))
    return out


def gather_rows(tape: Tape, a: Tensor, idx) -> Tensor:
    """Pick a[i, idx[i]] per row: (B, N) -> (B,)."""
    _check_2d("gather_rows", a)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1 or idx.shape[0] != a.data.shape[0]:
        raise NumericsError(f"gather_rows index shape {idx.shape} for data {a.data.shape}")
    if np.any((idx < 0) | (idx >= a.data.shape[1])):
        raise NumericsError("gather_rows: label index out of range")
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, idx])

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[rows, idx] = g
        return (ga,)

    tape.record(out, (a,), backward)
    return out


def rowmax_excluding(tape: Tape, a: Tensor, idx) -> Tensor:
    """Row-wise max over all columns except idx[i]: (B, N) -> (B,)."""
    _check_2d("rowmax_excluding", a)
    if a.data.shape[1] < 2:
        raise NumericsError("rowmax_excluding needs at least two columns")
    idx = np.asarray(idx, dtype=np.intp)
    rows = np.arange(a.data.shape[0])
    masked = a.data.copy()
    masked[rows, idx] = -np.inf
    arg = np.argmax(masked, axis=1)
    out = Tensor(masked[rows, arg])

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[rows, arg] = g
        return (ga,)

    tape.record(out, (a,), backward)
    return out


def row_dot(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    """Row-wise inner product: two (B, n) operands -> (B,)."""
    _check_2d("row_dot", a, b)
    _check_same_shape("row_dot", a, b)
    out = Tensor(np.sum(a.data * b.data, axis=1))
    tape.record(out, (a, b), lambda g: (g[:, None] * b.data, g[:, None] * a.data))
    return out


def sub_colvec(tape: Tape, a: Tensor, v: Tensor) -> Tensor:
    """Subtract a per-row scalar: (B, N) minus (B,) broadcast over columns."""
    _check_2d("sub_colvec", a)
    if v.data.ndim != 1 or v.data.shape[0] != a.data.shape[0]:
        raise NumericsError(f"sub_colvec shapes {a.data.shape} vs {v.data.shape}")
    out = Tensor(a.data - v.data[:, None])
    tape.record(out, (a, v), lambda g: (g, -g.sum(axis=1)))
    return out


def sum_all(tape: Tape, a: Tensor) -> Tensor:
    out = Tensor(np.sum(a.data))
    tape.record(out, (a,), lambda g: (np.full_like(a.data, float(g)),))
    return out


def mean_all(tape: Tape, a: Tensor) -> Tensor:
    size = a.data.size
    out = Tensor(np.sum(a.data) / size)
    tape.record(out, (a,), lambda g: (np.full_like(a.data, float(g) / size),))
    return out


def grad_wrt_input(f, x) -> np.ndarray:
    """Gradient of a scalar-valued f(tape, x_tensor) at x, with x's shape."""
    tape = Tape()
    xt = Tensor(x, requires_grad=True)
    out = f(tape, xt)
    if out.data.size != 1:
        raise NumericsError(f"gradient target must be scalar, got shape {out.data.shape}")
    tape.backward(out)
    return xt.grad if xt.grad is not None else np.zeros_like(xt.data)
