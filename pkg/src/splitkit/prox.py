"""Proximal operators, epsilon-subgradient audits and additive error injection.

An injected error moves an exact proximal point ``x_bar`` to
``x = x_bar + r``. The inexactness is measured by the epsilon-subgradient
slack of the *claimed* subgradient at ``x``::

    eps(x) >= sup_y  f(x) + <w(x), y - x> - f(y)

which :func:`epsilon_audit` lower-bounds over a finite probe set. The radius
of ``r`` is calibrated per call so the audited slack never exceeds the
configured budget.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg

__all__ = [
    "ErrorKind", "ErrorModel", "ProxResult", "SlackAudit", "soft_threshold",
    "prox_generalized_quadratic", "epsilon_audit", "prox_subgradient_check",
    "inject_error", "neighborhood_probes", "quadratic_batch", "l1_batch",
]


def soft_threshold(v, tau):
    """Componentwise ``sign(v) * max(|v| - tau, 0)``."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(np.asarray(tau) < 0):
        raise ValueError("threshold must be non-negative")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def prox_generalized_quadratic(Lambda, gamma_vec, H, b, weight: float = 1.0):
    """``argmin_x (weight/2)||Hx - b||^2 + 1/2 ||x - Lambda^{-1} gamma||^2_Lambda``.

    Solves ``(weight H^T H + Lambda) x = weight H^T b + gamma`` with a
    Cholesky factorization; no inverse is formed.
    """
    H = np.asarray(H, dtype=np.float64)
    S = weight * (H.T @ H) + np.asarray(Lambda, dtype=np.float64)
    G = linalg.cholesky_factor(S)
    return linalg.cholesky_solve(G, weight * (H.T @ np.asarray(b)) + np.asarray(gamma_vec))


# -- batched convex functions for audits -----------------------------------

def quadratic_batch(H, b, weight: float = 1.0) -> Callable:
    """``Y -> (weight/2)||H y - b||^2`` for each row ``y`` of ``Y``."""
    H = np.asarray(H, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)

    def f(Y):
        R = np.atleast_2d(Y) @ H.T - b
        return 0.5 * weight * np.einsum("ij,ij->i", R, R)
    return f


def l1_batch(gamma: float) -> Callable:
    def f(Y):
        return gamma * np.abs(np.atleast_2d(Y)).sum(axis=1)
    return f


def _eval(fn, Y, batched):
    Y = np.atleast_2d(Y)
    if batched:
        return np.asarray(fn(Y), dtype=np.float64)
    return np.array([fn(y) for y in Y], dtype=np.float64)


def epsilon_audit(fn, x, w, probes, batched: bool = False) -> float:
    """Certified lower bound on the ``eps`` for which ``w`` is an
    eps-subgradient of ``fn`` at ``x``: the largest violation
    ``fn(x) + <w, y - x> - fn(y)`` over ``probes``, clipped at zero."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    Y = np.asarray(probes, dtype=np.float64).reshape(-1, x.size)
    fx = _eval(fn, x, batched)[0]
    gaps = fx + (Y - x) @ np.atleast_1d(np.asarray(w, dtype=np.float64)) - _eval(fn, Y, batched)
    return max(0.0, float(gaps.max()))


def neighborhood_probes(center, rng, n_probes: int = 100, radius: float = 1.0,
                        extra=()) -> np.ndarray:
    """``n_probes`` points uniform in the ball around ``center`` plus ``extra``."""
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    dirs = rng.standard_normal((n_probes, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(n_probes) ** (1.0 / d)
    pts = [center[None, :], center + dirs * radii[:, None]]
    pts += [np.asarray(e, dtype=np.float64)[None, :] for e in extra if e is not None]
    return np.vstack(pts)


def prox_subgradient_check(q, x, x_plus, probes=None, rng=None, n_probes: int = 100,
                           tol: float = 1e-9, batched: bool = False) -> bool:
    """True iff ``q(y) >= q(x+) + <x - x+, y - x+>`` holds on every probe.

    Default probes mix a random neighbourhood of ``x+`` with points along
    ``+-(x - x+)``, where a wrong proximal point shows up first.
    """
    x = np.asarray(x, dtype=np.float64)
    x_plus = np.asarray(x_plus, dtype=np.float64)
    g = x - x_plus
    if probes is None:
        rng = np.random.default_rng(0) if rng is None else rng
        scales = np.array([1e-3, 1e-1, 1.0, 10.0])
        along = np.vstack([x_plus + s * g for s in scales] + [x_plus - s * g for s in scales])
        probes = np.vstack([neighborhood_probes(x_plus, rng, n_probes, 1.0), along,
                            x[None, :]])
    Y = np.atleast_2d(probes)
    lhs = _eval(q, Y, batched)
    rhs = _eval(q, x_plus, batched)[0] + (Y - x_plus) @ g
    return bool(np.all(lhs >= rhs - tol))


# -- error models -------------------------------------------------------------

class ErrorKind(enum.Enum):
    NONE = "none"
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


SCHEDULES = ("constant", "inverse", "inverse_square")


@dataclass(frozen=True)
class ErrorModel:
    """Additive proximal error specification.

    ``epsilon0`` bounds the audited slack. Deterministic models follow
    ``schedule`` (``constant``: eps0, ``inverse``: eps0/k,
    ``inverse_square``: eps0/k^2) at the full calibrated radius; stochastic
    models draw ``r`` uniformly from the calibrated ball with k-invariant
    parameters.
    """

    kind: ErrorKind = ErrorKind.NONE
    epsilon0: float = 0.0
    schedule: str = "constant"
    seed: int = 0
    n_probes: int = 100
    probe_radius: float = 1.0
    bisection_steps: int = 20

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if self.epsilon0 < 0:
            raise ValueError("epsilon0 must be >= 0")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")

    @property
    def active(self) -> bool:
        return self.kind is not ErrorKind.NONE and self.epsilon0 > 0

    def budget(self, k: int) -> float:
        if not self.active or k < 1:
            return 0.0
        if self.kind is ErrorKind.DETERMINISTIC:
            return self.epsilon0 / {"constant": 1, "inverse": k, "inverse_square": k * k}[self.schedule]
        return self.epsilon0

    @classmethod
    def from_dict(cls, d: dict | None) -> "ErrorModel":
        return cls() if not d else cls(**d)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "epsilon0": self.epsilon0, "schedule": self.schedule,
                "seed": self.seed, "n_probes": self.n_probes,
                "probe_radius": self.probe_radius, "bisection_steps": self.bisection_steps}


@dataclass
class ProxResult:
    point: np.ndarray
    r: np.ndarray
    epsilon: float
    probes: np.ndarray | None = None


@dataclass
class SlackAudit:
    """Audits a perturbed proximal point.

    The claimed subgradient at ``x`` is ``w_bar - Lambda (x - x_bar)``,
    which is what the proximal optimality condition reads off the iterate
    actually produced; ``Lambda`` is a matrix or a scalar.
    """

    fn: Callable
    x_bar: np.ndarray
    w_bar: np.ndarray
    Lambda: object
    probes: np.ndarray

    def claimed(self, x):
        d = x - self.x_bar
        L = self.Lambda
        return self.w_bar - (L @ d if np.ndim(L) == 2 else L * d)

    def slack(self, x) -> float:
        return epsilon_audit(self.fn, x, self.claimed(x), self.probes, batched=True)


def _max_radius(audit: SlackAudit, direction, budget, steps) -> float:
    ok = lambda t: audit.slack(audit.x_bar + t * direction) <= budget  # noqa: E731
    hi = 1.0
    while ok(hi) and hi < 1e6:
        hi *= 2.0
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def inject_error(exact, model: ErrorModel, k: int, audit: SlackAudit | None = None,
                 rng: np.random.Generator | None = None) -> ProxResult:
    """Perturb an exact proximal point according to ``model``.

    ``r = 0`` for ``k == 0`` or an inactive model. Without an ``audit`` the
    budget is read directly as a radius bound ``||r|| <= eps_k`` and the
    returned ``epsilon`` is ``||r||``.
    """
    exact = np.asarray(exact, dtype=np.float64)
    zero = ProxResult(exact.copy(), np.zeros_like(exact), 0.0,
                      None if audit is None else audit.probes)
    budget = model.budget(k)
    if budget <= 0.0:
        return zero
    if rng is None:
        rng = np.random.default_rng([model.seed, k])
    d = rng.standard_normal(exact.size)
    d /= np.linalg.norm(d)
    stochastic = model.kind is ErrorKind.STOCHASTIC
    frac = rng.random() ** (1.0 / exact.size) if stochastic else 1.0
    if audit is None:
        r = frac * budget * d
        return ProxResult(exact + r, r, float(np.linalg.norm(r)))
    t = frac * _max_radius(audit, d, budget, model.bisection_steps)
    eps = audit.slack(exact + t * d)
    while eps > budget and t > 0.0:  # slack need not be monotone in t
        t *= 0.5
        eps = audit.slack(exact + t * d)
        if t < 1e-300:
            t, eps = 0.0, 0.0
    r = t * d
    return ProxResult(exact + r, r, eps, audit.probes)
