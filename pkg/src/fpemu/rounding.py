"""Round-to-nearest-even quantization into a parametric format.

The kernel works on binary64 arrays.  That is exact for the public
contract (inputs are binary32-width surrogates, which convert to binary64
losslessly) and leaves headroom for the fused instruction paths, which
feed it round-to-odd intermediates wider than binary32.

The algorithm: decompose |x| as an integer significand times a power of
two via frexp, shift down to the target quantum 2^(max(E, e_min) - p)
with round-to-nearest-even on the dropped bits, and reassemble.  Rounding
happens on the gradual-underflow grid for every format; formats without
denormals flush a denormal result to signed zero afterwards, so inputs at
or above the minimum normal never flush.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import telemetry
from .formats import FpFormat, FpValue

__all__ = ["RoundFlag", "RoundingOutcome", "QuantTensor", "roundfp", "roundfp_array", "roundfp_tensor"]


class RoundFlag(enum.Flag):
    EXACT = enum.auto()
    ROUNDED = enum.auto()
    UNDERFLOWED_TO_ZERO = enum.auto()
    OVERFLOWED_TO_INF = enum.auto()
    FLUSHED_DENORMAL = enum.auto()


@dataclass(frozen=True)
class RoundingOutcome:
    value: FpValue
    flags: RoundFlag

    def __float__(self) -> float:
        return self.value.surrogate


def _round_core(x: np.ndarray, fmt: FpFormat) -> tuple[np.ndarray, np.ndarray]:
    """Round float64 values into ``fmt``.

    Returns ``(final, pre_flush)`` as float64 arrays whose values are
    exactly representable in the format (final) and in its gradual
    underflow variant (pre_flush).  The two differ only for /n formats.
    """
    # Arbitrary bit patterns are legal input; converting a signaling NaN
    # raises numpy's "invalid" FP flag even though the quieted NaN is
    # exactly what we want.
    with np.errstate(invalid="ignore"):
        x = np.asarray(x).astype(np.float64)
    out = np.empty_like(x)

    nan_mask = np.isnan(x)
    inf_mask = np.isinf(x)
    zero_mask = x == 0.0
    finite = ~(nan_mask | inf_mask | zero_mask)

    sign = np.where(np.signbit(x), -1.0, 1.0)

    # Sanitize masked-out lanes so the integer casts below never see
    # inf/NaN (numpy would warn even though the lanes are overwritten).
    mant, exp = np.frexp(np.where(finite, np.abs(x), 1.0))
    # |x| = m52 * 2^(exp - 53) with m52 an integer in [2^52, 2^53).
    m52 = (mant * 9007199254740992.0).astype(np.int64)  # 2^53
    e_val = exp.astype(np.int64) - 1

    over = finite & (e_val > fmt.e_max)

    # Quantum exponent of the rounding grid at each element's binade.
    q_exp = np.maximum(e_val, fmt.e_min) - fmt.mant_bits
    t = q_exp - (exp.astype(np.int64) - 53)
    t = np.clip(t, 0, 62)  # t >= 52 - mant_bits >= 29 for in-range values

    half = np.int64(1) << (t - np.int64(1))
    rem = m52 & ((np.int64(1) << t) - np.int64(1))
    floor = m52 >> t
    round_up = (rem > half) | ((rem == half) & ((floor & np.int64(1)) == np.int64(1)))
    n = floor + round_up

    mag = np.ldexp(n.astype(np.float64), q_exp.astype(np.int32))

    out[finite] = (sign * mag)[finite]
    out[zero_mask] = x[zero_mask]  # signed zero preserved
    out[inf_mask] = x[inf_mask]
    out[nan_mask] = np.nan
    # Post-round overflow: the grid result can land at 2^(e_max+1).
    too_big = np.zeros_like(nan_mask)
    too_big[finite] = mag[finite] > fmt.max_finite
    out[over | too_big] = (sign * np.inf)[over | too_big]

    pre_flush = out
    if fmt.denormals:
        return out, pre_flush
    final = out.copy()
    denorm = finite & (np.abs(out) > 0.0) & (np.abs(out) < fmt.min_normal)
    final[denorm] = (sign * 0.0)[denorm]
    return final, pre_flush


def roundfp_array(x: np.ndarray, fmt: FpFormat) -> np.ndarray:
    """Elementwise roundfp. Returns float32 (every format fits binary32)."""
    final, _ = _round_core(x, fmt)
    return final.astype(np.float32)


def roundfp(x: float, fmt: FpFormat) -> RoundingOutcome:
    """Round one value into ``fmt`` with flags.

    Total: accepts any float, including NaN and the infinities.  EXACT is
    set iff the value (and zero sign) survives unchanged; ROUNDED means
    the rounding step proper was inexact, independent of any flush.
    """
    arr = np.array([x], dtype=np.float64)
    final_a, pre_a = _round_core(arr, fmt)
    final = float(final_a[0])
    pre = float(pre_a[0])

    flags = RoundFlag(0)
    if _same_value(final, x):
        flags |= RoundFlag.EXACT
    if not _same_value(pre, x):
        flags |= RoundFlag.ROUNDED
    if math.isfinite(x) and x != 0.0 and pre == 0.0:
        flags |= RoundFlag.UNDERFLOWED_TO_ZERO
    if math.isfinite(x) and math.isinf(final):
        flags |= RoundFlag.OVERFLOWED_TO_INF
    if pre != 0.0 and math.isfinite(pre) and abs(pre) < fmt.min_normal and final == 0.0:
        flags |= RoundFlag.FLUSHED_DENORMAL
    return RoundingOutcome(FpValue(final, fmt), flags)


def _same_value(a: float, b: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if a == 0.0 and b == 0.0:
        return math.copysign(1.0, a) == math.copysign(1.0, b)
    return a == b


@dataclass(frozen=True)
class QuantTensor:
    """A dense tensor whose elements are all representable in ``fmt``."""

    data: np.ndarray
    fmt: FpFormat

    def __post_init__(self) -> None:
        if self.data.dtype != np.float32:
            raise TypeError("QuantTensor carries float32 data")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def stats(self, tensor_id: str, phase, step: int) -> "telemetry.DenormalStats":
        return telemetry.DenormalStats.from_array(
            self.data, self.fmt, tensor_id=tensor_id, phase=phase, step=step
        )


def roundfp_tensor(
    x: np.ndarray,
    fmt: FpFormat,
    *,
    sink: "telemetry.TelemetrySink | None" = None,
    tensor_id: str = "",
    phase=None,
    step: int = 0,
) -> QuantTensor:
    """Elementwise roundfp over a tensor, optionally recording telemetry.

    When a sink is given, a DenormalStats record for the quantized output
    is appended under (tensor_id, phase, step).  Recording never changes
    the numeric result.
    """
    qt = QuantTensor(roundfp_array(x, fmt), fmt)
    if sink is not None:
        sink.record(qt.stats(tensor_id, phase, step))
    return qt
