"""Composite problem ``min g(x) + gamma*||z||_1  s.t.  Ax + Bz = c`` with a
least-squares ``g``, and a seeded synthetic LASSO generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from . import linalg

__all__ = [
    "CompositeProblem", "LassoSpec", "ReconstructibilityError",
    "reconstructibility_check", "reconstructibility_threshold", "generate_lasso",
    "objective", "constraint_residual", "problem_to_json", "problem_from_json",
    "save_problem", "load_problem",
]

PROBLEM_FORMAT = "splitkit-problem"


class ReconstructibilityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """Problem data plus the splitting hyperparameters.

    ``half_quadratic`` selects ``g(x) = 1/2 ||Hx - b||^2`` (default, whose
    gradient is ``H^T H x - H^T b``) or ``g(x) = ||Hx - b||^2``.
    ``M_x``/``M_z`` are left as ``None`` when a scheme derives them.
    """

    H: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    gamma: float
    lam: float = 1.0
    lambda_x: float | None = None
    lambda_z: float = 1.0
    L: np.ndarray | None = None
    M_x: np.ndarray | None = None
    M_z: np.ndarray | None = None
    half_quadratic: bool = True

    def __post_init__(self):
        conv = {k: np.asarray(getattr(self, k), dtype=np.float64)
                for k in ("H", "b", "A", "B", "c")}
        for k, v in conv.items():
            object.__setattr__(self, k, v)
        m, n = self.H.shape
        p = self.A.shape[0]
        if self.b.shape != (m,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({m},)")
        if self.A.shape != (p, n) or self.B.shape[0] != p or self.c.shape != (p,):
            raise ValueError("A, B, c dimensions do not conform")
        if self.L is None:
            object.__setattr__(self, "L", np.eye(p))
        else:
            object.__setattr__(self, "L", np.asarray(self.L, dtype=np.float64))
        for k in ("M_x", "M_z"):
            v = getattr(self, k)
            if v is not None:
                object.__setattr__(self, k, np.asarray(v, dtype=np.float64))
        if self.gamma < 0 or self.lam <= 0 or self.lambda_z <= 0:
            raise ValueError("need gamma >= 0, lam > 0, lambda_z > 0")
        if self.lambda_x is None:
            object.__setattr__(self, "lambda_x", 1.05 * self.hess_norm)
        if self.lambda_x <= 0:
            raise ValueError("lambda_x must be positive")

    # dimensions
    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def n_z(self) -> int:
        return self.B.shape[1]

    @property
    def quad_weight(self) -> float:
        return 1.0 if self.half_quadratic else 2.0

    @cached_property
    def hess(self) -> np.ndarray:
        """Hessian of ``g``."""
        return self.quad_weight * (self.H.T @ self.H)

    @cached_property
    def lin(self) -> np.ndarray:
        """``grad g(x) = hess @ x - lin``."""
        return self.quad_weight * (self.H.T @ self.b)

    @cached_property
    def hess_norm(self) -> float:
        return self.quad_weight * linalg.gram_spectral_norm(self.H)

    @cached_property
    def ALA(self) -> np.ndarray:
        return self.A.T @ self.L @ self.A

    @cached_property
    def BLB(self) -> np.ndarray:
        return self.B.T @ self.L @ self.B

    def dfgpgd_Mx(self) -> np.ndarray:
        """The proximal weight that cancels the linear solve in the x-update."""
        return self.lambda_x * np.eye(self.n) - self.hess - self.ALA / self.lam

    def scalar_Mz(self) -> np.ndarray:
        """``M_z`` making ``Lambda_2 = lambda_z I``."""
        return self.lambda_z * np.eye(self.n_z) - self.BLB / self.lam

    def Lambda1(self, M_x=None) -> np.ndarray:
        M_x = self.M_x if M_x is None else M_x
        M_x = np.zeros((self.n, self.n)) if M_x is None else M_x
        return self.ALA / self.lam + M_x

    def Lambda2(self, M_z=None) -> np.ndarray:
        M_z = self.M_z if M_z is None else M_z
        M_z = np.zeros((self.n_z, self.n_z)) if M_z is None else M_z
        return self.BLB / self.lam + M_z

    def with_params(self, **kw) -> "CompositeProblem":
        return replace(self, **kw)

    def g(self, x) -> float:
        r = self.H @ x - self.b
        return 0.5 * self.quad_weight * float(r @ r)

    def h(self, z) -> float:
        return self.gamma * float(np.abs(z).sum())


@dataclass(frozen=True)
class LassoSpec:
    n: int
    m: int
    s: int
    gamma: float | None = None  # None -> 0.1 * ||H^T b||_inf
    noise_sigma: float = 0.0
    seed: int = 0
    half_quadratic: bool = True
    lam: float = 1.0
    lambda_z: float = 1.0
    lambda_x: float | None = None

    def __post_init__(self):
        if not (self.n > 0 and self.m > 0 and 0 < self.s <= self.n):
            raise ValueError(f"need n, m > 0 and 0 < s <= n (got {self})")


def reconstructibility_threshold(n: int, s: int) -> float:
    return 2.0 * s * math.log(n / s) + 7.0 / 5.0 * s + 1.0


def reconstructibility_check(n: int, m: int, s: int) -> bool:
    """``m > 2 s ln(n/s) + 7s/5 + 1``."""
    if n <= 0 or m <= 0 or s <= 0 or s > n:
        raise ValueError("need positive n, m, s with s <= n")
    return m > reconstructibility_threshold(n, s)


def generate_lasso(spec: LassoSpec, force: bool = False):
    """Return ``(problem, x_true)`` for a seeded synthetic LASSO instance.

    Consensus splitting: ``A = I``, ``B = -I``, ``c = 0``.
    """
    if not reconstructibility_check(spec.n, spec.m, spec.s) and not force:
        raise ReconstructibilityError(
            f"reconstructibility check failed: m={spec.m} does not exceed 2s ln(n/s) + 7s/5 + 1"
            f" = {reconstructibility_threshold(spec.n, spec.s):.2f} for n={spec.n}, s={spec.s}"
            " (use force to override)")
    rng = np.random.default_rng(spec.seed)
    H = rng.standard_normal((spec.m, spec.n)) / math.sqrt(spec.m)
    x_true = np.zeros(spec.n)
    support = rng.choice(spec.n, size=spec.s, replace=False)
    x_true[support] = rng.choice([-1.0, 1.0], size=spec.s)
    b = H @ x_true
    if spec.noise_sigma > 0:
        b = b + spec.noise_sigma * rng.standard_normal(spec.m)
    gamma = spec.gamma
    if gamma is None:
        gamma = 0.1 * float(np.abs(H.T @ b).max())
    eye = np.eye(spec.n)
    prob = CompositeProblem(H=H, b=b, A=eye, B=-eye, c=np.zeros(spec.n), gamma=gamma,
                            lam=spec.lam, lambda_x=spec.lambda_x, lambda_z=spec.lambda_z,
                            half_quadratic=spec.half_quadratic)
    return prob, x_true


def objective(prob: CompositeProblem, x, z) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != (prob.n,) or z.shape != (prob.n_z,):
        raise ValueError("dimension mismatch in objective")
    return prob.g(x) + prob.h(z)


def constraint_residual(prob: CompositeProblem, x, z) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != (prob.n,) or z.shape != (prob.n_z,):
        raise ValueError("dimension mismatch in constraint_residual")
    return float(np.linalg.norm(prob.A @ x + prob.B @ z - prob.c))


# -- serialization ----------------------------------------------------------

def _vec(v):
    return [float(x) for x in np.asarray(v).ravel()]


def problem_to_json(prob: CompositeProblem, x_true=None) -> dict:
    out = {
        "format": PROBLEM_FORMAT, "version": 1,
        "H": linalg.matrix_to_json(prob.H), "b": _vec(prob.b),
        "A": linalg.matrix_to_json(prob.A), "B": linalg.matrix_to_json(prob.B),
        "c": _vec(prob.c), "L": linalg.matrix_to_json(prob.L),
        "gamma": float(prob.gamma), "lam": float(prob.lam),
        "lambda_x": float(prob.lambda_x), "lambda_z": float(prob.lambda_z),
        "half_quadratic": bool(prob.half_quadratic),
    }
    for k in ("M_x", "M_z"):
        v = getattr(prob, k)
        out[k] = None if v is None else linalg.matrix_to_json(v)
    out["x_true"] = None if x_true is None else _vec(x_true)
    return out


def problem_from_json(obj: dict):
    if obj.get("format") != PROBLEM_FORMAT:
        raise ValueError("not a splitkit problem file")
    mats = {k: linalg.matrix_from_json(obj[k]) for k in ("H", "A", "B", "L")}
    extra = {k: (None if obj.get(k) is None else linalg.matrix_from_json(obj[k]))
             for k in ("M_x", "M_z")}
    prob = CompositeProblem(
        b=np.asarray(obj["b"]), c=np.asarray(obj["c"]), gamma=obj["gamma"], lam=obj["lam"],
        lambda_x=obj["lambda_x"], lambda_z=obj["lambda_z"],
        half_quadratic=obj["half_quadratic"], **mats, **extra)
    x_true = None if obj.get("x_true") is None else np.asarray(obj["x_true"])
    return prob, x_true


def save_problem(prob: CompositeProblem, path, x_true=None) -> None:
    Path(path).write_text(json.dumps(problem_to_json(prob, x_true), sort_keys=True) + "\n")


def load_problem(path):
    return problem_from_json(json.loads(Path(path).read_text()))
