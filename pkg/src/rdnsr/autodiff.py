"""Dense 4-D tensors with reverse-mode differentiation.

The engine covers exactly the operations the super-resolution graph needs:
same-padding cross-correlation, ReLU, channel concatenation, elementwise
addition, sub-pixel shuffling, and a weighted-sum reduction used to build
scalar losses.  Forward ops optionally record onto a :class:`Tape`;
:func:`backward` replays the tape in reverse and accumulates gradients on
intermediate tensors and on :class:`Parameter` objects.

Values are float32 by default.  Every op preserves the dtype of its
inputs, and float64 graphs are supported so gradients can be verified
against finite differences at full precision.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError, UsageError

DEFAULT_DTYPE = np.float32
_ALLOWED_DTYPES = (np.float32, np.float64)


class Tensor4:
    """A dense (batch, channel, height, width) array of finite reals.

    ``grad`` is transient storage used while a tape is being replayed; it
    is ``None`` outside of a backward pass.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _ALLOWED_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim != 4:
            raise DimensionError(
                f"Tensor4 requires 4 dimensions (n, c, h, w), got shape {arr.shape}"
            )
        if min(arr.shape) < 1:
            raise DimensionError(f"all Tensor4 dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("Tensor4 values must be finite (no NaN/Inf)")
        self.data = arr
        self.grad: np.ndarray | None = None

    @classmethod
    def zeros(cls, shape, dtype=DEFAULT_DTYPE) -> "Tensor4":
        return cls(np.zeros(shape, dtype=dtype))

    @classmethod
    def full(cls, shape, value, dtype=DEFAULT_DTYPE) -> "Tensor4":
        return cls(np.full(shape, value, dtype=dtype))

    @classmethod
    def scalar(cls, value, dtype=DEFAULT_DTYPE) -> "Tensor4":
        return cls(np.full((1, 1, 1, 1), value, dtype=dtype))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() requires a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def copy(self) -> "Tensor4":
        return Tensor4(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor4(shape={self.shape}, dtype={self.data.dtype})"


class Parameter:
    """A learnable tensor plus its gradient and Adam moment buffers.

    ``grad``, ``m`` and ``v`` always share the shape and dtype of
    ``value``.  Gradients accumulate across a backward pass and are zeroed
    by the optimizer step.
    """

    __slots__ = ("value", "grad", "m", "v")

    def __init__(self, value: Tensor4):
        self.value = value
        self.grad = Tensor4.zeros(value.shape, dtype=value.dtype)
        self.m = Tensor4.zeros(value.shape, dtype=value.dtype)
        self.v = Tensor4.zeros(value.shape, dtype=value.dtype)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.data[...] = 0

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape}, dtype={self.value.data.dtype})"


class Tape:
    """Ordered record of forward operations for one backward pass.

    Ops append a backward closure as they execute, so the list is in
    topological order by construction.  :func:`backward` replays it in
    exact reverse and then consumes the tape; a consumed tape cannot be
    recorded onto or replayed again.
    """

    __slots__ = ("_entries", "_consumed")

    def __init__(self):
        self._entries: list[Callable[[], None]] = []
        self._consumed = False

    def record(self, backward_fn: Callable[[], None]) -> None:
        if self._consumed:
            raise UsageError("tape already consumed by backward(); build a new forward pass")
        self._entries.append(backward_fn)

    def __len__(self) -> int:
        return len(self._entries)


def _accumulate(target: Tensor4 | Parameter, grad: np.ndarray) -> None:
    if isinstance(target, Parameter):
        target.grad.data += grad
        return
    if target.grad is None:
        target.grad = grad.copy()
    else:
        target.grad += grad


def _check_same_dtype(op: str, *tensors: Tensor4) -> None:
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        raise UsageError(f"{op}: mixed dtypes {sorted(str(d) for d in dtypes)}")


def conv2d(
    x: Tensor4,
    weight: Parameter,
    bias: Parameter,
    padding: int,
    tape: Tape | None = None,
) -> Tensor4:
    """Same-size cross-correlation with zero padding and a per-channel bias.

    ``weight`` has shape (cout, cin, k, k) with k in {1, 3} and
    ``padding`` must equal (k - 1) // 2 so spatial dimensions are
    preserved.  ``bias`` is stored as a (1, cout, 1, 1) tensor.  The
    backward closure produces exact gradients for the input, the weight
    and the bias.
    """
    n, cin, h, w = x.shape
    cout, wcin, k, k2 = weight.shape
    if k != k2 or k not in (1, 3):
        raise DimensionError(f"conv2d weight: kernel must be square with k in {{1, 3}}, got {weight.shape}")
    if wcin != cin:
        raise DimensionError(f"conv2d input: expected {wcin} channels for weight {weight.shape}, got {cin}")
    if padding != (k - 1) // 2:
        raise DimensionError(f"conv2d padding: must be (k-1)/2 = {(k - 1) // 2} for k={k}, got {padding}")
    if bias.shape != (1, cout, 1, 1):
        raise DimensionError(f"conv2d bias: expected shape (1, {cout}, 1, 1), got {bias.shape}")
    _check_same_dtype("conv2d", x, weight.value, bias.value)
    if not np.isfinite(x.data).all():
        raise NumericError("conv2d input contains non-finite values")

    p = padding
    if p:
        xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    else:
        xp = x.data
    # im2col: one row per output pixel, one column per (cin, ky, kx) tap
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, cin * k * k)
    wmat = weight.value.data.reshape(cout, cin * k * k)
    flat = cols @ wmat.T
    flat += bias.value.data.reshape(1, cout)
    out = Tensor4(flat.reshape(n, h, w, cout).transpose(0, 3, 1, 2))

    if tape is not None:
        def _backward():
            gy = out.grad
            if gy is None:
                return
            gmat = gy.transpose(0, 2, 3, 1).reshape(n * h * w, cout)
            bias.grad.data += gy.sum(axis=(0, 2, 3)).reshape(1, cout, 1, 1)
            weight.grad.data += (gmat.T @ cols).reshape(weight.shape)
            gcols = (gmat @ wmat).reshape(n, h, w, cin, k, k).transpose(0, 3, 4, 5, 1, 2)
            gxp = np.zeros((n, cin, h + 2 * p, w + 2 * p), dtype=gy.dtype)
            for dy in range(k):
                for dx in range(k):
                    gxp[:, :, dy:dy + h, dx:dx + w] += gcols[:, :, dy, dx]
            _accumulate(x, gxp[:, :, p:p + h, p:p + w] if p else gxp)

        tape.record(_backward)
    return out


def relu(x: Tensor4, tape: Tape | None = None) -> Tensor4:
    """Elementwise max(0, x).  The subgradient at exactly 0 is 0."""
    out = Tensor4(np.maximum(x.data, 0))
    if tape is not None:
        mask = x.data > 0

        def _backward():
            if out.grad is not None:
                _accumulate(x, out.grad * mask)

        tape.record(_backward)
    return out


def concat_channels(inputs: Sequence[Tensor4], tape: Tape | None = None) -> Tensor4:
    """Concatenate along the channel axis, in the order given."""
    if not inputs:
        raise UsageError("concat_channels: input list is empty")
    first = inputs[0]
    for i, t in enumerate(inputs[1:], start=1):
        if (t.shape[0], t.shape[2], t.shape[3]) != (first.shape[0], first.shape[2], first.shape[3]):
            raise DimensionError(
                f"concat_channels input {i}: batch/spatial {t.shape} does not match input 0 {first.shape}"
            )
    _check_same_dtype("concat_channels", *inputs)
    out = Tensor4(np.concatenate([t.data for t in inputs], axis=1))

    if tape is not None:
        offsets = np.cumsum([0] + [t.shape[1] for t in inputs])

        def _backward():
            gy = out.grad
            if gy is None:
                return
            for t, lo, hi in zip(inputs, offsets[:-1], offsets[1:]):
                _accumulate(t, gy[:, lo:hi])

        tape.record(_backward)
    return out


def add(a: Tensor4, b: Tensor4, tape: Tape | None = None) -> Tensor4:
    """Elementwise sum of two identically shaped tensors."""
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    _check_same_dtype("add", a, b)
    out = Tensor4(a.data + b.data)

    if tape is not None:
        def _backward():
            gy = out.grad
            if gy is None:
                return
            _accumulate(a, gy)
            _accumulate(b, gy)

        tape.record(_backward)
    return out


def pixel_shuffle(x: Tensor4, r: int, tape: Tape | None = None) -> Tensor4:
    """Depth-to-space rearrangement by an integer factor ``r``.

    Channel-major ordering: output(n, oc, r*y + dy, r*x + dx) equals
    input(n, oc*r^2 + dy*r + dx, y, x).  A bijection on elements, so its
    backward is the exact inverse permutation of the upstream gradient.
    """
    if r < 1:
        raise UsageError(f"pixel_shuffle: factor must be >= 1, got {r}")
    n, c, h, w = x.shape
    if c % (r * r) != 0:
        raise DimensionError(f"pixel_shuffle: {c} channels not divisible by r^2 = {r * r}")
    oc = c // (r * r)
    out_data = (
        x.data.reshape(n, oc, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, oc, h * r, w * r)
    )
    out = Tensor4(out_data)

    if tape is not None:
        def _backward():
            gy = out.grad
            if gy is None:
                return
            gx = (
                gy.reshape(n, oc, h, r, w, r)
                .transpose(0, 1, 3, 5, 2, 4)
                .reshape(n, c, h, w)
            )
            _accumulate(x, gx)

        tape.record(_backward)
    return out


def weighted_sum(x: Tensor4, coeffs: np.ndarray, tape: Tape | None = None) -> Tensor4:
    """Scalar projection sum(x * coeffs) with constant coefficients.

    The workhorse for reducing a tensor to a scalar loss or a gradient-check
    projection; backward routes ``coeffs`` times the upstream scalar to x.
    """
    coeffs = np.asarray(coeffs, dtype=x.data.dtype)
    if coeffs.shape != x.data.shape:
        raise DimensionError(f"weighted_sum: coeffs shape {coeffs.shape} != tensor shape {x.shape}")
    out = Tensor4(np.array([[[[float((x.data * coeffs).sum())]]]], dtype=x.data.dtype))

    if tape is not None:
        def _backward():
            if out.grad is not None:
                _accumulate(x, coeffs * out.grad.reshape(()))

        tape.record(_backward)
    return out


def backward(tape: Tape, loss: Tensor4) -> None:
    """Replay ``tape`` in reverse, accumulating d(loss)/d(input) everywhere.

    ``loss`` must be a scalar (1, 1, 1, 1) tensor produced on this tape.
    Parameters reached by the traversal end up with their gradient in
    ``.grad``; parameters not on the tape keep their zero gradient.  The
    tape is consumed: a second call without a new forward pass raises.
    """
    if loss.shape != (1, 1, 1, 1):
        raise UsageError(f"backward: loss must be a scalar tensor, got shape {loss.shape}")
    if tape._consumed:
        raise UsageError("backward: tape already consumed; run a new forward pass first")
    loss.grad = np.ones_like(loss.data)
    for fn in reversed(tape._entries):
        fn()
    tape._entries.clear()
    tape._consumed = True
