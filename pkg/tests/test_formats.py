import numpy as np
import pytest

from fpemu.formats import (
    BINARY32,
    FpClass,
    FpFormat,
    FpValue,
    classify,
    classify_array,
    decode16,
    decode16_array,
    encode16,
    encode16_array,
)


HALF = FpFormat.parse("1/5/10/d")
HALF_N = FpFormat.parse("1/5/10/n")
WIDE = FpFormat.parse("1/6/9/d")
BF8 = FpFormat.parse("1/8/7/n")


def test_frozen_constants_half():
    assert HALF.bias == 15
    assert HALF.e_min == -14
    assert HALF.e_max == 15
    assert HALF.min_denormal == 2.0**-24
    assert HALF.min_normal == 2.0**-14
    assert HALF.max_finite == 65504.0
    assert HALF.overflow_threshold == 65520.0
    assert HALF.width == 16


def test_frozen_constants_wide_exponent():
    assert WIDE.bias == 31
    assert WIDE.e_min == -30
    assert WIDE.e_max == 31
    assert WIDE.min_denormal == 2.0**-39
    assert WIDE.min_normal == 2.0**-30
    assert WIDE.max_finite == (2.0 - 2.0**-9) * 2.0**31
    assert WIDE.width == 16


def test_frozen_constants_quarter_mantissa():
    assert BF8.e_min == -126
    assert BF8.e_max == 127
    assert BF8.min_denormal is None
    assert BF8.smallest_positive == 2.0**-126
    assert BF8.max_finite == (2.0 - 2.0**-7) * 2.0**127
    assert BF8.width == 16


def test_binary32_matches_numpy_limits():
    info = np.finfo(np.float32)
    assert BINARY32.max_finite == float(info.max)
    assert BINARY32.min_normal == float(info.tiny)
    assert BINARY32.min_denormal == float(info.smallest_subnormal)


def test_str_parse_round_trip():
    for spec in ("1/5/10/d", "1/5/10/n", "1/6/9/d", "1/6/9/n", "1/8/7/n", "1/2/1/d"):
        assert str(FpFormat.parse(spec)) == spec


@pytest.mark.parametrize(
    "bad",
    [
        "1/9/6/d",      # exponent field too wide
        "1/1/10/d",     # exponent field too narrow
        "1/5/0/d",      # mantissa too narrow
        "1/5/24/d",     # mantissa wider than binary32 can host
        "2/5/10/d",     # sign field must be a single bit
        "1/5/10/x",
        "1/5/10",
        "1-5-10-d",
        "",
    ],
)
def test_parse_rejects_malformed_specs(bad):
    with pytest.raises(ValueError):
        FpFormat.parse(bad)


def test_contains_boundaries():
    assert HALF.contains(0.0)
    assert HALF.contains(-0.0)
    assert HALF.contains(2.0**-24)
    assert not HALF.contains(2.0**-25)
    assert HALF.contains(65504.0)
    assert not HALF.contains(65520.0)
    assert HALF.contains(float("inf"))
    assert HALF.contains(float("nan"))
    # flush-to-zero variant drops the denormal range
    assert not HALF_N.contains(2.0**-24)
    assert HALF_N.contains(2.0**-14)
    # one ulp below min_normal is the largest denormal
    assert HALF.contains(2.0**-14 - 2.0**-24)
    assert not HALF_N.contains(2.0**-14 - 2.0**-24)


def test_contains_respects_mantissa_width():
    assert HALF.contains(1.0 + 2.0**-10)
    assert not HALF.contains(1.0 + 2.0**-11)
    assert WIDE.contains(1.0 + 2.0**-9)
    assert not WIDE.contains(1.0 + 2.0**-10)


def test_classify_examples():
    assert classify(0.0, HALF) is FpClass.ZERO
    assert classify(-0.0, HALF) is FpClass.ZERO
    assert classify(2.0**-24, HALF) is FpClass.DENORMAL
    assert classify(-2.0**-15, HALF) is FpClass.DENORMAL
    assert classify(2.0**-14, HALF) is FpClass.NORMAL
    assert classify(float("inf"), HALF) is FpClass.INFINITY
    assert classify(float("nan"), HALF) is FpClass.NAN
    # same magnitude, different format, different class
    assert classify(2.0**-24, WIDE) is FpClass.NORMAL


def test_classify_array_agrees_with_scalar():
    rng = np.random.default_rng(3)
    words = rng.integers(0, 1 << 16, size=2000, dtype=np.uint16)
    vals = words.view(np.float16).astype(np.float32)
    codes = classify_array(vals, HALF)
    for v, c in zip(vals.tolist(), codes.tolist()):
        assert classify(v, HALF).name == FpClass(
            [FpClass.ZERO, FpClass.DENORMAL, FpClass.NORMAL,
             FpClass.INFINITY, FpClass.NAN][c]
        ).name


def test_encoding_partition_counts():
    # every 16-bit word decodes, and the value classes partition the space
    for fmt in (HALF, WIDE):
        words = np.arange(1 << 16, dtype=np.uint16)
        vals = decode16_array(words, fmt)
        codes = classify_array(vals, fmt)
        counts = np.bincount(codes, minlength=5)
        p = fmt.mant_bits
        assert counts[0] == 2                      # signed zeros
        assert counts[1] == 2 * (2**p - 1)         # denormals
        assert counts[3] == 2                      # infinities
        assert counts[4] == 2 * (2**p - 1)         # NaN payloads
        assert counts.sum() == 1 << 16


def test_half_wire_format_matches_ieee_binary16():
    words = np.arange(1 << 16, dtype=np.uint16)
    ours = decode16_array(words, HALF)
    ref = words.view(np.float16).astype(np.float32)
    both_nan = np.isnan(ours) & np.isnan(ref)
    assert np.all((ours == ref) | both_nan)
    # sign of every non-NaN value survives
    ok = ~np.isnan(ref)
    assert np.array_equal(np.signbit(ours[ok]), np.signbit(ref[ok]))


def test_encode_decode_round_trip_all_words():
    for fmt in (HALF, WIDE):
        words = np.arange(1 << 16, dtype=np.uint16)
        vals = decode16_array(words, fmt)
        back = encode16_array(vals, fmt)
        # NaNs collapse to the canonical quiet pattern; everything else
        # round-trips bit for bit
        nan_words = np.isnan(vals)
        assert np.array_equal(back[~nan_words], words[~nan_words])
        assert np.all(back[nan_words] == encode16(float("nan"), fmt))


def test_flush_format_decodes_denormal_words_as_zero():
    # a denormal bit pattern in a flush-to-zero format reads back as a
    # signed zero, so decoded values always satisfy contains()
    word_pos = np.uint16(0x0001)
    word_neg = np.uint16(0x8001)
    assert decode16(word_pos, HALF_N) == 0.0
    v = decode16(word_neg, HALF_N)
    assert v == 0.0 and np.signbit(v)
    for word in (word_pos, word_neg):
        assert HALF_N.contains(decode16(word, HALF_N))


def test_encode16_scalar_examples():
    assert encode16(1.0, HALF) == 0x3C00
    assert encode16(-2.0, HALF) == 0xC000
    assert encode16(2.0**-24, HALF) == 0x0001
    assert encode16(65504.0, HALF) == 0x7BFF
    assert encode16(float("inf"), HALF) == 0x7C00
    assert encode16(float("nan"), HALF) == 0x7E00


def test_fpvalue_rejects_unrepresentable():
    FpValue(1.5, HALF)
    with pytest.raises(ValueError):
        FpValue(1.0 + 2.0**-11, HALF)
    with pytest.raises(ValueError):
        FpValue(2.0**-24, HALF_N)
