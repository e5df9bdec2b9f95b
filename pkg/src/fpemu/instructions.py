"""Mixed-precision multiply-accumulate instructions.

Four scalar instructions over a 16-bit-style format, differing in where
rounding happens and how wide the accumulator is:

  mac    a   <- round(a + round(x*y))          two roundings, format width
  macs   a32 <- round32(a32 + round(x*y))      product rounded, wide accumulate
  fmac   a   <- round(a + x*y)                 fused, single rounding, format width
  fmacs  a32 <- round32(a32 + x*y)             fused, wide accumulate

plus the chunked dot product ``fmac8_dot`` (a format-width fused
accumulator drained into a binary32 master every ``chunk`` elements) and
a ``matmul`` that reduces every output element with one of these
schedules in ascending index order.

Scalar calls go through exact integer arithmetic.  The tensor paths reach
the same bit-exact results differently: the exact product is a binary64
value (at most 48 significand bits), and a TwoSum error term turns the
binary64 addition into round-to-odd, which the rounding kernel may then
round to any format of 24 or fewer significand bits without double
rounding.  Both paths are tested against the rational oracle.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from . import _dyadic
from .formats import BINARY32, FpFormat
from .rounding import QuantTensor, roundfp_array

__all__ = [
    "AccumMode",
    "mac",
    "macs",
    "fmac",
    "fmacs",
    "fmac8_dot",
    "matmul",
    "matmul_wide",
]


class AccumMode(enum.Enum):
    MAC = "mac"
    MACS = "macs"
    FMAC = "fmac"
    FMACS = "fmacs"
    FMAC8 = "fmac8"

    @classmethod
    def parse(cls, name: "str | AccumMode") -> "AccumMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown accumulate mode {name!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


def _check_operand(v: float, fmt: FpFormat, name: str) -> None:
    if not fmt.contains(v):
        raise ValueError(f"{name}={v!r} is not representable in {fmt}")


# ── scalar instructions ────────────────────────────────────────────────


def mac(a: float, x: float, y: float, fmt: FpFormat) -> float:
    """Unfused MAC at format width: round(a + round(x*y))."""
    _check_operand(a, fmt, "a")
    _check_operand(x, fmt, "x")
    _check_operand(y, fmt, "y")
    special, prod = _dyadic.mul_exact(x, y)
    r1 = special if special is not None else _round_product(prod, fmt)
    return _dyadic.add_round(a, r1, fmt)


def macs(a32: float, x: float, y: float, fmt: FpFormat) -> float:
    """Unfused MAC with a binary32 accumulator: round32(a32 + round(x*y))."""
    _check_operand(a32, BINARY32, "a32")
    _check_operand(x, fmt, "x")
    _check_operand(y, fmt, "y")
    special, prod = _dyadic.mul_exact(x, y)
    r1 = special if special is not None else _round_product(prod, fmt)
    return _dyadic.add_round(a32, r1, BINARY32)


def fmac(a: float, x: float, y: float, fmt: FpFormat) -> float:
    """Fused MAC at format width: one rounding of the exact a + x*y."""
    _check_operand(a, fmt, "a")
    _check_operand(x, fmt, "x")
    _check_operand(y, fmt, "y")
    return _dyadic.fused_add_round(a, x, y, fmt)


def fmacs(a32: float, x: float, y: float, fmt: FpFormat) -> float:
    """Fused MAC with a binary32 accumulator: round32(a32 + x*y)."""
    _check_operand(a32, BINARY32, "a32")
    _check_operand(x, fmt, "x")
    _check_operand(y, fmt, "y")
    return _dyadic.fused_add_round(a32, x, y, BINARY32)


def _round_product(prod: float, fmt: FpFormat) -> float:
    if prod == 0.0:
        return prod  # keep the product's zero sign
    m, k = _dyadic.to_mk(prod)
    return _dyadic.round_mk(m, k, fmt)


def _add32(a: float, b: float) -> float:
    """Single-precision addition of two binary32 values."""
    return _dyadic.add_round(a, b, BINARY32)


def fmac8_dot(
    w, x, fmt: FpFormat, chunk: int = 8, *, validate: bool = True
) -> float:
    """Chunked fused dot product, the sum-of-products a dot unit built
    from FMAC instructions would produce.

    A format-width fused accumulator handles each product; every
    ``chunk`` steps (checked before the step, so i = 0 harmlessly drains
    a zero) it is added into a binary32 master accumulator and cleared.
    After a final drain the master is rounded back to ``fmt``.
    """
    w = list(map(float, w))
    x = list(map(float, x))
    if len(w) != len(x):
        raise ValueError(f"length mismatch: {len(w)} vs {len(x)}")
    if chunk < 1:
        raise ValueError("chunk must be positive")
    if validate:
        for i, v in enumerate(w):
            _check_operand(v, fmt, f"w[{i}]")
        for i, v in enumerate(x):
            _check_operand(v, fmt, f"x[{i}]")
    master = 0.0
    acc = 0.0
    for i in range(len(w)):
        if i % chunk == 0:
            master = _add32(master, acc)
            acc = 0.0
        acc = _dyadic.fused_add_round(acc, w[i], x[i], fmt)
    master = _add32(master, acc)
    if math.isnan(master):
        return math.nan
    if math.isinf(master):
        return master
    m, k = _dyadic.to_mk(master)
    return _dyadic.round_mk(m, k, fmt, negative_zero=math.copysign(1.0, master) < 0 and master == 0.0)


# ── vectorized kernels ─────────────────────────────────────────────────


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Knuth TwoSum: s = fl(a+b) and the exact error a+b-s.

    Lanes holding infinities produce NaN error terms; callers mask them
    out, so the numpy invalid-value flag is suppressed here.
    """
    with np.errstate(invalid="ignore"):
        s = a + b
        bb = s - a
        err = (a - (s - bb)) + (b - bb)
    return s, err


def _add_round_to_odd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Binary64 sum of a and b, rounded to odd.

    Round-to-odd keeps a sticky record of inexactness in the last bit, so
    a following round-to-nearest into 24 or fewer significand bits equals
    a single rounding of the exact sum (53 >= 24 + 2).
    """
    s, err = _two_sum(a, b)
    needs_nudge = (err != 0) & np.isfinite(s)
    if not needs_nudge.any():
        return s
    bits = s.view(np.uint64) if isinstance(s, np.ndarray) else np.array([s]).view(np.uint64)
    odd = (bits & np.uint64(1)).astype(bool)
    needs_nudge &= ~odd
    # Nudge one ulp toward the discarded error.  Adjacent floats differ in
    # the last bit, so the neighbor in either direction has an odd LSB.
    toward = np.where(err > 0, np.inf, -np.inf)
    return np.where(needs_nudge, np.nextafter(s, toward), s)


def _fused_step_array(acc: np.ndarray, x: np.ndarray, y: np.ndarray, fmt: FpFormat) -> np.ndarray:
    """round(acc + x*y, fmt) elementwise, exactly once. All inputs float64."""
    prod = x * y  # exact: at most 48 significand bits, exponents in range
    return roundfp_array(_add_round_to_odd(acc, prod), fmt).astype(np.float64)


def _coerce_matrix(m, fmt: FpFormat, name: str) -> np.ndarray:
    """Validate a matmul operand and hand back float64 data."""
    if isinstance(m, QuantTensor):
        if m.fmt == fmt:
            return m.data.astype(np.float64)
        m = m.data
    a = np.asarray(m, dtype=np.float64)
    q = roundfp_array(a, fmt).astype(np.float64)
    same = (q == a) | (np.isnan(q) & np.isnan(a))
    # Signed zeros: rounding never flips a zero's sign, so == is enough.
    if not same.all():
        i = tuple(np.argwhere(~same)[0])
        raise ValueError(f"{name}{list(i)} = {a[i]!r} is not representable in {fmt}")
    return a


def _reduce_matmul(
    a: np.ndarray, b: np.ndarray, mode: AccumMode, fmt: FpFormat, chunk: int
) -> np.ndarray:
    """Shared reduction: returns the pre-output accumulator as float64.

    For MAC/FMAC/FMAC8 the result is already at format width; for
    MACS/FMACS it is the binary32 master accumulator.
    """
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise ValueError(f"shape mismatch: ({m}, {k}) @ ({k2}, {n})")
    with np.errstate(invalid="ignore"):
        return _reduce_matmul_loops(a, b, mode, fmt, chunk, m, n, k)


def _reduce_matmul_loops(a, b, mode, fmt, chunk, m, n, k):
    # IEEE specials (inf - inf, 0 * inf) legitimately produce NaN lanes;
    # the caller suppressed numpy's invalid-value flag.
    acc = np.zeros((m, n), dtype=np.float64)
    if mode is AccumMode.FMACS:
        for i in range(k):
            prod = a[:, i, None] * b[None, i, :]
            acc = roundfp_array(_add_round_to_odd(acc, prod), BINARY32).astype(np.float64)
        return acc
    if mode is AccumMode.MACS:
        for i in range(k):
            prod16 = roundfp_array(a[:, i, None] * b[None, i, :], fmt).astype(np.float64)
            # Both addends are binary32 values, so float32 addition is the
            # single correctly rounded binary32 add.
            acc = (acc.astype(np.float32) + prod16.astype(np.float32)).astype(np.float64)
        return acc
    if mode is AccumMode.MAC:
        for i in range(k):
            prod16 = roundfp_array(a[:, i, None] * b[None, i, :], fmt).astype(np.float64)
            acc = roundfp_array(_add_round_to_odd(acc, prod16), fmt).astype(np.float64)
        return acc
    if mode is AccumMode.FMAC:
        for i in range(k):
            acc = _fused_step_array(acc, a[:, i, None], b[None, i, :], fmt)
        return acc
    if mode is AccumMode.FMAC8:
        master = np.zeros((m, n), dtype=np.float32)
        for i in range(k):
            if i % chunk == 0:
                master = master + acc.astype(np.float32)
                acc = np.zeros((m, n), dtype=np.float64)
            acc = _fused_step_array(acc, a[:, i, None], b[None, i, :], fmt)
        master = master + acc.astype(np.float32)
        return master.astype(np.float64)
    raise ValueError(f"unsupported mode {mode}")


def matmul(
    a,
    b,
    fmt: FpFormat,
    mode: "AccumMode | str" = AccumMode.FMACS,
    chunk: int = 8,
) -> QuantTensor:
    """Matrix product with emulated accumulation, output rounded to fmt.

    Every output element is reduced independently over ascending inner
    index, so results are bit-deterministic regardless of tensor shapes
    or threading.
    """
    mode = AccumMode.parse(mode)
    if chunk < 1:
        raise ValueError("chunk must be positive")
    fa = _coerce_matrix(a, fmt, "a")
    fb = _coerce_matrix(b, fmt, "b")
    acc = _reduce_matmul(fa, fb, mode, fmt, chunk)
    return QuantTensor(roundfp_array(acc, fmt), fmt)


def matmul_wide(
    a,
    b,
    fmt: FpFormat,
    mode: "AccumMode | str" = AccumMode.FMACS,
    chunk: int = 8,
) -> np.ndarray:
    """Like :func:`matmul` but without the final rounding into ``fmt``.

    Returns the binary32 accumulator state (float32).  This is the
    weight-gradient path: inputs are format values, the reduction follows
    the accumulate mode, and the result stays at binary32 width for the
    master-weight update.
    """
    mode = AccumMode.parse(mode)
    if chunk < 1:
        raise ValueError("chunk must be positive")
    fa = _coerce_matrix(a, fmt, "a")
    fb = _coerce_matrix(b, fmt, "b")
    return _reduce_matmul(fa, fb, mode, fmt, chunk).astype(np.float32)
