"""Scalar arithmetic backends for the solvers, with flop instrumentation.

A backend owns the representation of vectors and matrices (``float64``
arrays or raw fixed-point ``int64`` arrays) and every operation a solver
step performs. Each operation charges the attached :class:`FlopCounter`:
one flop per multiply and one per add; sign, comparison and threshold
selection are free. A length-``n`` dot product accumulates from zero and
costs ``2n``.
"""

from __future__ import annotations

from collections import defaultdict
from contextlib import contextmanager

import numpy as np

from . import fixedpoint as fp
from . import kernels, linalg

__all__ = ["FlopCounter", "Float64Arithmetic", "FixedArithmetic", "make_arithmetic"]


class FlopCounter:
    """Cumulative flop counts, split by solver section.

    ``measured`` is what the kernels executed. ``charged`` replaces every
    cached-factor solve by an ``n**3`` term, the accounting under which a
    direct x-update costs ``n^3 + O(n^2)`` per iteration.
    """

    def __init__(self):
        self.measured = 0
        self.charged = 0
        self.solves = 0
        self.factorizations = 0
        self.section = "other"
        self.sections = defaultdict(lambda: [0, 0])

    def add(self, flops: int, charged: int | None = None):
        charged = flops if charged is None else charged
        self.measured += flops
        self.charged += charged
        sec = self.sections[self.section]
        sec[0] += flops
        sec[1] += charged

    @contextmanager
    def scope(self, name: str):
        prev, self.section = self.section, name
        try:
            yield self
        finally:
            self.section = prev

    def snapshot(self) -> dict:
        return {k: tuple(v) for k, v in self.sections.items()}


class Float64Arithmetic:
    name = "float64"
    exact_constants = True

    def __init__(self, counter: FlopCounter | None = None):
        self.counter = counter or FlopCounter()

    def vec(self, x):
        return np.array(x, dtype=np.float64)

    def mat(self, M):
        return np.ascontiguousarray(M, dtype=np.float64)

    def const(self, c):
        return float(c)

    def to_float(self, x):
        return np.asarray(x, dtype=np.float64)

    def zeros(self, n):
        return np.zeros(n)

    def matvec(self, M, x):
        r, c = M.shape
        self.counter.add(2 * r * c)
        return M @ x

    def add(self, a, b):
        self.counter.add(a.size)
        return a + b

    def sub(self, a, b):
        self.counter.add(a.size)
        return a - b

    def scale(self, c, a):
        self.counter.add(a.size)
        return c * a

    def soft(self, a, tau):
        self.counter.add(a.size)  # |a| - tau
        return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)

    def factor(self, S):
        """Cholesky factor of ``S`` (setup time; float64 regardless)."""
        self.counter.factorizations += 1
        return linalg.cholesky_factor(S)

    def solve(self, G, rhs):
        n = rhs.size
        self.counter.solves += 1
        self.counter.add(2 * n * n, charged=n ** 3)
        return linalg.cholesky_solve(G, rhs)


class FixedArithmetic:
    """Bit-accurate fixed-point backend.

    Matrices and constants are quantized once when handed to :meth:`mat`
    or :meth:`const`; solves use the quantized lower factor and quantized
    reciprocals of its diagonal, so the iteration never divides.
    """

    exact_constants = False

    def __init__(self, fmt: fp.QFormat = fp.Q16_8, counter: FlopCounter | None = None):
        self.fmt = fmt
        self.counter = counter or FlopCounter()
        self.name = f"{fmt}-{fmt.overflow.value}-{fmt.quantize.value}"

    def vec(self, x):
        return fp.encode_array(x, self.fmt)

    def mat(self, M):
        return np.ascontiguousarray(fp.encode_array(M, self.fmt))

    def const(self, c):
        return int(fp.encode_array(np.array([c]), self.fmt)[0])

    def to_float(self, x):
        return fp.decode_array(x, self.fmt)

    def zeros(self, n):
        return np.zeros(n, dtype=np.int64)

    def matvec(self, M, x):
        r, c = M.shape
        self.counter.add(2 * r * c)
        return fp.array_matvec(M, x, self.fmt)

    def add(self, a, b):
        self.counter.add(a.size)
        return fp.array_add(a, b, self.fmt)

    def sub(self, a, b):
        self.counter.add(a.size)
        return fp.array_sub(a, b, self.fmt)

    def scale(self, c, a):
        self.counter.add(a.size)
        return fp.array_scale(c, a, self.fmt)

    def soft(self, a, tau):
        self.counter.add(a.size)
        a = np.asarray(a, dtype=np.int64)
        # exact on the grid: |a| - tau never leaves the representable range
        return np.where(a > tau, a - tau, np.where(a < -tau, a + tau, 0)).astype(np.int64)

    def factor(self, S):
        self.counter.factorizations += 1
        G = linalg.cholesky_factor(S)
        return self.mat(G), fp.encode_array(1.0 / np.diag(G), self.fmt)

    def solve(self, factor, rhs):
        G, recip = factor
        n = rhs.size
        self.counter.solves += 1
        self.counter.add(2 * n * n, charged=n ** 3)
        f = self.fmt
        args = (f.frac_bits, f.word_bits, f.round_even, f.saturate)
        y = kernels.q_trisolve(G, recip, rhs, True, *args)
        return kernels.q_trisolve(G, recip, y, False, *args)


def make_arithmetic(spec, counter: FlopCounter | None = None):
    """``"float64"``, a :class:`~splitkit.fixedpoint.QFormat`, or a format string."""
    if spec is None or spec == "float64":
        return Float64Arithmetic(counter)
    if isinstance(spec, fp.QFormat):
        return FixedArithmetic(spec, counter)
    if isinstance(spec, str):
        return FixedArithmetic(fp.QFormat.parse(spec), counter)
    raise ValueError(f"unknown arithmetic {spec!r}")
