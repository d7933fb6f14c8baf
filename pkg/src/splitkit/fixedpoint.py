"""Bit-accurate signed fixed-point emulation.

Scalars (:class:`QScalar`) use Python integers and work for any word width.
The array helpers operate on raw ``int64`` numpy arrays and go through the
kernel backend; they support word widths up to 31 bits so that an exact
product of two raw values always fits in 62 bits.

There is deliberately no division: callers quantize reciprocal constants
once with :func:`q_encode` and multiply.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels

__all__ = [
    "OverflowMode", "QuantizeMode", "QFormat", "QScalar", "Q16_8",
    "FormatMismatch", "q_encode", "q_add", "q_sub", "q_mul", "q_matvec",
    "encode_array", "decode_array", "array_add", "array_sub", "array_mul",
    "array_scale", "array_matvec",
]

MAX_ARRAY_WORD_BITS = 31


class OverflowMode(enum.Enum):
    WRAP = "wrap"
    SATURATE = "saturate"


class QuantizeMode(enum.Enum):
    TRUNCATE = "truncate"  # toward negative infinity
    ROUND_EVEN = "round_even"


class FormatMismatch(ValueError):
    """Operands carry different Q-formats."""


@dataclass(frozen=True)
class QFormat:
    """Signed two's-complement format with ``int_bits`` (sign included)
    integer bits and ``frac_bits`` fractional bits."""

    int_bits: int = 16
    frac_bits: int = 8
    overflow: OverflowMode = OverflowMode.WRAP
    quantize: QuantizeMode = QuantizeMode.TRUNCATE

    def __post_init__(self):
        if self.int_bits < 1 or self.frac_bits < 0:
            raise ValueError(f"invalid Q-format Q{self.int_bits}.{self.frac_bits}")
        object.__setattr__(self, "overflow", OverflowMode(self.overflow))
        object.__setattr__(self, "quantize", QuantizeMode(self.quantize))

    @property
    def word_bits(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.word_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.word_bits - 1)) - 1

    @property
    def lsb(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)

    @property
    def min_value(self) -> float:
        return self.raw_min / (1 << self.frac_bits)

    @property
    def max_value(self) -> float:
        return self.raw_max / (1 << self.frac_bits)

    @property
    def saturate(self) -> bool:
        return self.overflow is OverflowMode.SATURATE

    @property
    def round_even(self) -> bool:
        return self.quantize is QuantizeMode.ROUND_EVEN

    @classmethod
    def parse(cls, text: str, overflow="wrap", quantize="truncate") -> "QFormat":
        """Parse ``"Q16.8"`` (case-insensitive)."""
        m = re.fullmatch(r"\s*[qQ](\d+)\.(\d+)\s*", text)
        if not m:
            raise ValueError(f"bad Q-format string {text!r}; expected e.g. 'Q16.8'")
        return cls(int(m.group(1)), int(m.group(2)), OverflowMode(overflow),
                   QuantizeMode(quantize))

    def __str__(self):
        return f"Q{self.int_bits}.{self.frac_bits}"

    # -- integer-level reduction shared by the scalar API ------------------

    def overflow_raw(self, q: int) -> int:
        if self.saturate:
            return min(max(q, self.raw_min), self.raw_max)
        span = 1 << self.word_bits
        return ((q - self.raw_min) % span) + self.raw_min

    def quantize_scaled(self, scaled: Fraction) -> int:
        """Map an exact value already scaled by ``2**frac_bits`` to an integer."""
        if self.round_even:
            return round(scaled)  # Fraction.__round__ is half-to-even
        return scaled.numerator // scaled.denominator


Q16_8 = QFormat(16, 8)


@dataclass(frozen=True)
class QScalar:
    raw: int
    fmt: QFormat = Q16_8

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(f"raw {self.raw} does not fit {self.fmt}")

    @property
    def exact(self) -> Fraction:
        return Fraction(self.raw, 1 << self.fmt.frac_bits)

    @property
    def value(self) -> float:
        return float(self.exact)

    def __float__(self):
        return self.value

    def __add__(self, other):
        return q_add(self, other)

    def __sub__(self, other):
        return q_sub(self, other)

    def __mul__(self, other):
        return q_mul(self, other)


def q_encode(x, fmt: QFormat = Q16_8) -> QScalar:
    scaled = Fraction(x) * (1 << fmt.frac_bits)
    return QScalar(fmt.overflow_raw(fmt.quantize_scaled(scaled)), fmt)


def _same_format(a: QScalar, b: QScalar) -> QFormat:
    if a.fmt != b.fmt:
        raise FormatMismatch(f"{a.fmt} vs {b.fmt}")
    return a.fmt


def q_add(a: QScalar, b: QScalar) -> QScalar:
    fmt = _same_format(a, b)
    return QScalar(fmt.overflow_raw(a.raw + b.raw), fmt)


def q_sub(a: QScalar, b: QScalar) -> QScalar:
    fmt = _same_format(a, b)
    return QScalar(fmt.overflow_raw(a.raw - b.raw), fmt)


def q_mul(a: QScalar, b: QScalar) -> QScalar:
    fmt = _same_format(a, b)
    # exact product lives on the 2^(-2f) grid
    exact = Fraction(a.raw * b.raw, 1 << fmt.frac_bits)
    return QScalar(fmt.overflow_raw(fmt.quantize_scaled(exact)), fmt)


def q_matvec(M: Sequence[Sequence[QScalar]], v: Sequence[QScalar]) -> list[QScalar]:
    """Matrix-vector product with left-to-right accumulation per row."""
    if any(len(row) != len(v) for row in M):
        raise ValueError("dimension mismatch in q_matvec")
    cells = [x for row in M for x in row] + list(v)
    if not cells:
        return [None] * len(M)  # pragma: no cover - degenerate
    fmt = cells[0].fmt
    if any(c.fmt != fmt for c in cells):
        raise FormatMismatch("q_matvec operands must share one format")
    out = []
    for row in M:
        acc = QScalar(0, fmt)
        for m, x in zip(row, v):
            acc = q_add(acc, q_mul(m, x))
        out.append(acc)
    return out


# -- raw int64 array API ----------------------------------------------------

def _check_array_format(fmt: QFormat):
    if fmt.word_bits > MAX_ARRAY_WORD_BITS:
        raise ValueError(f"array kernels support at most {MAX_ARRAY_WORD_BITS}-bit words")


def encode_array(x, fmt: QFormat = Q16_8) -> np.ndarray:
    """Quantize a float array onto the format grid, returning raw ``int64``."""
    _check_array_format(fmt)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot encode non-finite values")
    scaled = np.ldexp(x, fmt.frac_bits)  # exact power-of-two scaling
    q = np.rint(scaled) if fmt.round_even else np.floor(scaled)
    # clamp before the int cast so huge inputs stay well defined
    big = float(1 << 62)
    q = np.clip(q, -big, big).astype(np.int64)
    if fmt.saturate:
        return np.clip(q, fmt.raw_min, fmt.raw_max)
    return ((q - fmt.raw_min) & ((1 << fmt.word_bits) - 1)) + fmt.raw_min


def decode_array(raw, fmt: QFormat = Q16_8) -> np.ndarray:
    return np.ldexp(np.asarray(raw, dtype=np.float64), -fmt.frac_bits)


def array_add(a, b, fmt: QFormat) -> np.ndarray:
    return kernels.q_add_vec(a, b, fmt.word_bits, fmt.saturate)


def array_sub(a, b, fmt: QFormat) -> np.ndarray:
    return kernels.q_add_vec(a, -np.asarray(b, dtype=np.int64), fmt.word_bits,
                             fmt.saturate)


def array_mul(a, b, fmt: QFormat) -> np.ndarray:
    return kernels.q_mul_vec(a, b, fmt.frac_bits, fmt.word_bits, fmt.round_even,
                             fmt.saturate)


def array_scale(c_raw: int, a, fmt: QFormat) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    return array_mul(np.full(a.shape, c_raw, dtype=np.int64), a, fmt)


def array_matvec(M, v, fmt: QFormat) -> np.ndarray:
    M = np.asarray(M, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if M.ndim != 2 or M.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {M.shape} @ {v.shape}")
    return kernels.q_matvec(M, v, fmt.frac_bits, fmt.word_bits, fmt.round_even,
                            fmt.saturate)
