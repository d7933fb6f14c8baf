from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitkit import fixedpoint as fp
from splitkit.fixedpoint import (FormatMismatch, OverflowMode, QFormat, QScalar, QuantizeMode,
                                 q_add, q_encode, q_matvec, q_mul, q_sub)

Q = fp.Q16_8
SAT = QFormat(16, 8, OverflowMode.SATURATE)
RNE = QFormat(16, 8, quantize=QuantizeMode.ROUND_EVEN)

raw24 = st.integers(min_value=Q.raw_min, max_value=Q.raw_max)


def test_format_geometry():
    assert Q.word_bits == 24
    assert Q.min_value == -32768.0
    assert Q.max_value == 32767.99609375
    assert str(Q) == "Q16.8"
    assert QFormat.parse("q16.8") == Q
    assert QFormat.parse("Q4.4", "saturate", "round_even").saturate
    with pytest.raises(ValueError):
        QFormat.parse("16.8")


def test_encode_examples():
    assert q_encode(1.5).raw == 384
    assert q_encode(0.0).raw == 0
    assert q_encode(40000.0, SAT).value == 32767.99609375
    assert q_encode(-40000.0, SAT).value == -32768.0


def test_encode_modes():
    # 1/3 * 256 = 85.33: truncation and rounding agree; -1/3 differs
    assert q_encode(Fraction(-1, 3)).raw == -86
    assert q_encode(Fraction(-1, 3), RNE).raw == -85
    # ties go to even
    assert q_encode(Fraction(3, 512), RNE).raw == 2
    assert q_encode(Fraction(1, 512), RNE).raw == 0


def test_wrap_is_modular():
    v = q_encode(32768.0)  # one past the top wraps to the bottom
    assert v.raw == Q.raw_min


def test_add_mul_examples():
    assert q_add(q_encode(1.25), q_encode(2.5)).value == 3.75
    assert q_mul(q_encode(0.00390625), q_encode(0.00390625)).value == 0.0
    assert q_mul(q_encode(-3.0), q_encode(2.0)).value == -6.0
    assert (q_encode(2.0) - q_encode(0.5)).value == 1.5


def test_format_mismatch():
    with pytest.raises(FormatMismatch):
        q_add(q_encode(1.0, Q), q_encode(1.0, SAT))


def test_raw_range_enforced():
    with pytest.raises(ValueError):
        QScalar(1 << 23, Q)


def test_matvec_examples():
    one, zero = q_encode(1.0), q_encode(0.0)
    v = [q_encode(1.5), q_encode(2.25)]
    assert q_matvec([[one, zero], [zero, one]], v) == v
    assert [x.value for x in q_matvec([[zero, zero], [zero, zero]], v)] == [0.0, 0.0]
    # rational oracle: 1.5 + 2.25 = 15/4, on the 2^-8 grid
    out = q_matvec([[one, one], [one, one]], v)
    assert [x.exact for x in out] == [Fraction(15, 4)] * 2
    with pytest.raises(ValueError):
        q_matvec([[one]], v)


@given(raw24)
def test_additive_identity(r):
    a = QScalar(r, Q)
    assert q_add(a, q_encode(0)) == a


@given(raw24, raw24)
def test_wrap_matches_twos_complement(ra, rb):
    s = q_add(QScalar(ra, Q), QScalar(rb, Q)).raw
    expect = (ra + rb) % (1 << 24)
    expect = expect - (1 << 24) if expect >= 1 << 23 else expect
    assert s == expect


@given(raw24, raw24)
def test_saturate_stays_in_range(ra, rb):
    for op in (q_add, q_sub, q_mul):
        r = op(QScalar(ra, SAT), QScalar(rb, SAT)).raw
        assert SAT.raw_min <= r <= SAT.raw_max


@given(st.integers(-2000, 2000), st.integers(-2000, 2000))
def test_exact_on_grid(a, b):
    # products of multiples of 1/16 land on the 2^-8 grid
    x, y = Fraction(a, 16), Fraction(b, 16)
    assert q_mul(q_encode(x, SAT), q_encode(y, SAT)).exact == min(max(x * y, Fraction(-32768)),
                                                                   Fraction(SAT.raw_max, 256))
    assert q_add(q_encode(x), q_encode(y)).exact == x + y


@settings(max_examples=50)
@given(st.lists(st.floats(-300, 300, allow_nan=False), min_size=1, max_size=8))
def test_array_api_matches_scalar_api(xs):
    for fmt in (Q, SAT, RNE):
        raw = fp.encode_array(xs, fmt)
        assert list(raw) == [q_encode(x, fmt).raw for x in xs]
        sq = fp.array_mul(raw, raw, fmt)
        assert list(sq) == [q_mul(QScalar(int(r), fmt), QScalar(int(r), fmt)).raw for r in raw]
        s = fp.array_add(raw, raw[::-1], fmt)
        assert list(s) == [q_add(QScalar(int(a), fmt), QScalar(int(b), fmt)).raw
                           for a, b in zip(raw, raw[::-1])]


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_array_matvec_matches_scalar(r, c, seed):
    rng = np.random.default_rng(seed)
    for fmt in (Q, SAT):
        M = fp.encode_array(rng.uniform(-200, 200, (r, c)), fmt)
        v = fp.encode_array(rng.uniform(-200, 200, c), fmt)
        got = fp.array_matvec(M, v, fmt)
        ref = q_matvec([[QScalar(int(x), fmt) for x in row] for row in M],
                       [QScalar(int(x), fmt) for x in v])
        assert list(got) == [x.raw for x in ref]


def test_decode_roundtrip():
    xs = np.arange(-50, 50) / 256.0
    assert np.array_equal(fp.decode_array(fp.encode_array(xs)), xs)
