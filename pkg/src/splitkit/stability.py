"""Descriptor-form Lure model of the dfgpgd iteration and its absolute
stability certificates.

The continuous-time model is ``E zeta' = Gamma zeta - Phi(zeta) - c_off``
with state ``zeta = (x, z, w)``::

    E     = blockdiag(lambda_x I - H_g, Lambda_2, I)
    Gamma = [[0, 0, -A^T L], [0, 0, -B^T L], [L A, L B, 0]]
    Phi   = (grad g, d h, 0),   c_off = (0, 0, L c)

``Gamma`` is skew, so the unforced linear block is lossless. The Lyapunov
equation for ``E^{-1} Gamma`` then has no unique solution, and the
certifier reports that as a failed precondition rather than a pass.

Nonlinearities are handled through a batched callable ``phi(Z)`` acting on
the rows of ``Z``. The subdifferential of ``gamma ||z||_1`` is replaced by
the gradient of its Moreau envelope, ``clip(z / mu, -gamma, gamma)``,
which is single valued and has slopes in ``[0, 1/mu]``.

Envelope rate: with ``V = 1/2 d^T P d`` and ``P M + M^T P = -Q`` one gets
``V' <= -1/2 d^T Q d <= -(lambda_min(Q) / lambda_max(P)) V`` along the linear
part (monotone feedback only helps), hence::

    1/2 ||zeta - zeta*||^2 <= V(0) / lambda_min(P) * exp(-lambda_min(Q) / lambda_max(P) t)

That rate is what the certificate checks. The nominal
rate ``2 lambda_min(Q) / lambda_min(P)`` is reported alongside as ``nominal_rate``;
it is already violated by ``E = 1, Gamma = -1, Q = 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve

from . import linalg
from .problem import CompositeProblem

__all__ = [
    "LureSystem", "build_lure", "minimality_check", "KYPResult", "kyp_solve",
    "SPRResult", "spr_check", "transfer", "SectorEstimate", "sector_estimate",
    "EnvelopeResult", "envelope_simulate", "smoothed_equilibrium",
    "StabilityCertificate", "certify", "certify_system", "huber_grad",
]

_RANK_EPS = 2.0 ** -52


def huber_grad(z, gamma: float, mu: float):
    """Gradient of the Moreau envelope (parameter ``mu``) of ``gamma ||.||_1``."""
    return np.clip(np.asarray(z) / mu, -gamma, gamma)


@dataclass
class LureSystem:
    E: np.ndarray
    Gamma: np.ndarray
    Sigma: np.ndarray
    c_offset: np.ndarray
    phi: object = None  # batched callable, rows of Z -> rows of Phi(Z)
    Omega: np.ndarray | None = None
    blocks: tuple = ()  # (n, n_z, p) for systems built from a problem
    zeta_hint: np.ndarray | None = None

    def __post_init__(self):
        self.E = np.atleast_2d(np.asarray(self.E, dtype=np.float64))
        self.Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=np.float64))
        self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=np.float64))
        self.c_offset = np.atleast_1d(np.asarray(self.c_offset, dtype=np.float64))
        if self.Omega is not None:
            self.Omega = np.atleast_2d(np.asarray(self.Omega, dtype=np.float64))
        d = self.E.shape[0]
        if self.E.shape != (d, d) or self.Gamma.shape != (d, d) or self.Sigma.shape[0] != d:
            raise ValueError("E, Gamma, Sigma dimensions do not conform")

    @property
    def dim(self) -> int:
        return self.E.shape[0]

    @property
    def M(self) -> np.ndarray:
        """``E^{-1} Gamma``."""
        return np.linalg.solve(self.E, self.Gamma)

    def Phi(self, Z) -> np.ndarray:
        Z = np.atleast_2d(Z)
        if self.phi is None:
            return np.zeros_like(Z)
        return np.asarray(self.phi(Z), dtype=np.float64).reshape(Z.shape)

    def rhs(self, zeta) -> np.ndarray:
        """``Gamma zeta - Phi(zeta) - c_off``; the state derivative is ``E^{-1}`` of this."""
        return self.Gamma @ zeta - self.Phi(zeta)[0] - self.c_offset


def build_lure(prob: CompositeProblem, mu: float = 0.1, zeta_hint=None) -> LureSystem:
    """Descriptor model of dfgpgd on ``prob`` with an ``mu``-smoothed l1 term."""
    if not prob.lambda_x > prob.hess_norm:
        raise linalg.NotPositiveDefinite(
            f"E is not positive definite: lambda_x = {prob.lambda_x:.6g} <= ||H_g||_2 = "
            f"{prob.hess_norm:.6g}")
    n, nz, p = prob.n, prob.n_z, prob.p
    L, A, B = prob.L, prob.A, prob.B
    E1 = prob.lambda_x * np.eye(n) - prob.hess
    E2 = prob.lambda_z * np.eye(nz)
    E = np.zeros((n + nz + p,) * 2)
    E[:n, :n] = E1
    E[n:n + nz, n:n + nz] = E2
    E[n + nz:, n + nz:] = np.eye(p)
    if not linalg.is_positive_definite(E1):
        raise linalg.NotPositiveDefinite("lambda_x I - H_g is not positive definite")
    G = np.zeros_like(E)
    G[:n, n + nz:] = -A.T @ L
    G[n:n + nz, n + nz:] = -B.T @ L
    G[n + nz:, :n] = L @ A
    G[n + nz:, n:n + nz] = L @ B
    c_off = np.concatenate([np.zeros(n + nz), L @ prob.c])
    hess, lin, gamma = prob.hess, prob.lin, prob.gamma

    def phi(Z):
        Z = np.atleast_2d(Z)
        out = np.zeros_like(Z)
        out[:, :n] = Z[:, :n] @ hess.T - lin
        out[:, n:n + nz] = huber_grad(Z[:, n:n + nz], gamma, mu)
        return out

    return LureSystem(E=E, Gamma=G, Sigma=np.eye(E.shape[0]), c_offset=c_off, phi=phi,
                      blocks=(n, nz, p), zeta_hint=zeta_hint)


def _rank(M) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(M.shape) * _RANK_EPS))


def minimality_check(sys: LureSystem, Omega=None) -> tuple[bool, bool | None]:
    """Kalman rank tests for ``(E^{-1} Gamma, E^{-1} Sigma, Omega)``.

    Observability is ``None`` when no output matrix is known yet.
    """
    M = sys.M
    d = sys.dim
    EiS = np.linalg.solve(sys.E, sys.Sigma)
    blocks = [EiS]
    for _ in range(d - 1):
        blocks.append(M @ blocks[-1])
    controllable = _rank(np.hstack(blocks)) == d
    Om = sys.Omega if Omega is None else np.atleast_2d(Omega)
    if Om is None:
        return controllable, None
    rows = [Om]
    for _ in range(d - 1):
        rows.append(rows[-1] @ M)
    return controllable, _rank(np.vstack(rows)) == d


@dataclass
class KYPResult:
    P: np.ndarray
    Omega: np.ndarray
    Q: np.ndarray
    residual: float
    p_pd: bool

    def __iter__(self):  # unpacks as (P, Omega)
        return iter((self.P, self.Omega))


def kyp_solve(sys: LureSystem, Q=None) -> KYPResult:
    """``P (E^{-1} Gamma) + (E^{-1} Gamma)^T P = -Q`` and ``Omega = Sigma^T E^{-T} P``.

    Raises :class:`~splitkit.linalg.NoUniqueSolution` when the Lyapunov
    operator is singular. A solution that is not positive definite is
    returned with ``p_pd = False``.
    """
    d = sys.dim
    Q = np.eye(d) if Q is None else np.atleast_2d(np.asarray(Q, dtype=np.float64))
    M = sys.M
    P = linalg.solve_lyapunov_like(M, Q)
    residual = float(np.linalg.norm(P @ M + M.T @ P + Q))
    Omega = sys.Sigma.T @ np.linalg.solve(sys.E.T, P)
    try:
        linalg.cholesky_factor(P)
        pd = True
    except linalg.NotPositiveDefinite:
        pd = False
    return KYPResult(P=P, Omega=Omega, Q=Q, residual=residual, p_pd=pd)


# -- frequency domain ---------------------------------------------------------

def transfer(sys: LureSystem, s: complex, Omega=None) -> np.ndarray:
    """``G(s) = Omega (s E - Gamma)^{-1} Sigma``."""
    Om = sys.Omega if Omega is None else np.atleast_2d(Omega)
    if Om is None:
        raise ValueError("system has no output matrix Omega")
    return Om @ np.linalg.solve(s * sys.E - sys.Gamma, sys.Sigma.astype(complex))


def default_frequency_grid(sys: LureSystem, points: int = 200) -> np.ndarray:
    """``omega = 0`` plus log-spaced points over ``[1e-3, 1e3]``, widened to
    two decades beyond the eigenvalue moduli of ``E^{-1} Gamma``."""
    mods = np.abs(np.linalg.eigvals(sys.M))
    mods = mods[mods > 0]
    lo, hi = -3.0, 3.0
    if mods.size:
        lo = min(lo, np.floor(np.log10(mods.min())) - 2)
        hi = max(hi, np.ceil(np.log10(mods.max())) + 2)
    return np.concatenate([[0.0], np.logspace(lo, hi, points)])


@dataclass
class SPRResult:
    ok: bool
    margin: float
    worst_omega: float
    singular_at: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _gain(K, m):
    K = np.asarray(K, dtype=np.float64)
    return K * np.eye(m) if K.ndim == 0 else K


def spr_check(sys: LureSystem, P=None, K_lower=0.0, K_upper=0.0, freq_grid=None,
              Omega=None) -> SPRResult:
    """Grid test that ``T = (I + K_u G)(I + K_l G)^{-1}`` has a positive
    definite Hermitian part at every ``j omega`` on the grid.

    ``P`` is accepted for interface symmetry with the KYP route and is not
    needed by the frequency test.
    """
    del P
    grid = default_frequency_grid(sys) if freq_grid is None else np.asarray(freq_grid, float)
    margin, worst, singular = np.inf, float("nan"), []
    m = None
    for w in grid:
        try:
            G = transfer(sys, 1j * w, Omega)
        except np.linalg.LinAlgError:
            singular.append(float(w))
            continue
        if m is None:
            m = G.shape[0]
            Kl, Ku = _gain(K_lower, m), _gain(K_upper, m)
            eye = np.eye(m)
        D = eye + Kl @ G
        if np.linalg.cond(D) > 1e12:
            singular.append(float(w))
            continue
        T = (eye + Ku @ G) @ np.linalg.inv(D)
        herm = 0.5 * (T + T.conj().T)
        lam = float(np.linalg.eigvalsh(herm).min())
        if lam < margin:
            margin, worst = lam, float(w)
    ok = not singular and margin > 0
    return SPRResult(ok=bool(ok), margin=float(margin), worst_omega=worst, singular_at=singular)


# -- sector -----------------------------------------------------------------

@dataclass
class SectorEstimate:
    k_lower: float
    k_upper: float
    violations: int
    bounded: bool
    samples: int
    half_widths: list = field(default_factory=list)

    def __iter__(self):  # unpacks as (k_lower, k_upper, violations)
        return iter((self.k_lower, self.k_upper, self.violations))


def _scalar_sector(psi, zeta):
    """Tightest ``[m - r, m + r]`` with ``||psi - m zeta|| <= r ||zeta||`` on every row.

    For scalar gains the sector form expands to
    ``||psi - m zeta||^2 - r^2 ||zeta||^2`` with ``m`` the midpoint and
    ``r`` the half-width, so the search is one-dimensional and convex in ``m``.
    """
    nz = np.einsum("ij,ij->i", zeta, zeta)
    keep = nz > 0
    psi, zeta, nz = psi[keep], zeta[keep], nz[keep]
    a = np.einsum("ij,ij->i", psi, psi) / nz
    b = np.einsum("ij,ij->i", psi, zeta) / nz

    def r2(m):
        return float(np.max(a - 2.0 * b * m)) + m * m

    lo, hi = float(b.min()), float(b.max())
    if hi - lo <= 1e-15 * max(1.0, abs(hi)):
        m = 0.5 * (lo + hi)
    else:
        m = optimize.minimize_scalar(r2, bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-12 * max(1.0, abs(hi))}).x
    r = float(np.sqrt(max(r2(m), 0.0)))
    return float(m), r


def _sector_samples(sys, rng, count, radius, center):
    d = sys.dim
    dirs = rng.standard_normal((count, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    zeta = dirs * (radius * rng.random(count) ** (1.0 / d))[:, None]
    base = sys.Phi(center[None, :])
    psi = np.linalg.solve(sys.E, (sys.Phi(center + zeta) - base).T).T
    return psi, zeta


def sector_estimate(sys: LureSystem, phi_samples: int = 10_000, domain_radius: float = 1.0,
                    center=None, seed: int = 0, tol: float = 1e-9) -> SectorEstimate:
    """Sampled scalar sector ``[k_lower, k_upper]`` for ``E^{-1} Phi`` around ``center``.

    Increments ``psi = E^{-1}(Phi(center + zeta) - Phi(center))`` are sampled
    with ``zeta`` uniform in the ball. The sample is repeated at radii
    shrunk by 1e-2, 1e-4 and 1e-6; a half-width that keeps growing tenfold
    per shrink is reported as an unbounded sector (``k_upper = inf``).
    """
    rng = np.random.default_rng(seed)
    center = np.zeros(sys.dim) if center is None else np.asarray(center, dtype=np.float64)
    psi, zeta = _sector_samples(sys, rng, phi_samples, domain_radius, center)
    m, r = _scalar_sector(psi, zeta)
    widths = [r]
    small = max(100, phi_samples // 10)
    for shrink in (1e-2, 1e-4, 1e-6):
        ps, zs = _sector_samples(sys, rng, small, domain_radius * shrink, center)
        widths.append(_scalar_sector(ps, zs)[1])
    growth = [widths[i + 1] / max(widths[i], 1e-300) for i in range(len(widths) - 1)]
    bounded = not all(g > 10.0 for g in growth)
    if not bounded:
        return SectorEstimate(max(0.0, m - r), float("inf"), 0, False, phi_samples, widths)
    pad = 1e-9 * max(1.0, abs(m) + r)
    kl, ku = m - r - pad, m + r + pad
    prod = np.einsum("ij,ij->i", psi - kl * zeta, psi - ku * zeta)
    violations = int(np.sum(prod > tol))
    return SectorEstimate(float(kl), float(ku), violations, True, phi_samples, widths)


# -- simulation -------------------------------------------------------------

def smoothed_equilibrium(sys: LureSystem, guess=None) -> np.ndarray:
    """Root of ``Gamma zeta - Phi(zeta) - c_off`` (the smoothed fixed point)."""
    x0 = np.zeros(sys.dim) if guess is None else np.asarray(guess, dtype=np.float64)
    for method in ("hybr", "lm"):
        sol = optimize.root(sys.rhs, x0, method=method)
        if np.linalg.norm(sys.rhs(sol.x)) <= 1e-9 * max(1.0, np.linalg.norm(sol.x)):
            return sol.x
        x0 = sol.x if np.all(np.isfinite(sol.x)) else x0
    raise RuntimeError(f"equilibrium solve failed: {sol.message}")


@dataclass
class EnvelopeResult:
    ok: bool
    t: np.ndarray
    half_sq_dist: np.ndarray
    bound: np.ndarray
    nominal_bound: np.ndarray
    rate: float
    nominal_rate: float
    dt: float
    halvings: int
    trajectory: np.ndarray
    max_violation: float
    nominal_ok: bool


def envelope_simulate(sys: LureSystem, zeta0, T_end: float = 10.0, dt: float = 1e-2,
                      P=None, Q=None, zeta_star=None, atol: float = 1e-6,
                      max_halvings: int = 10) -> EnvelopeResult:
    """RK4 integration of ``E zeta' = Gamma zeta - Phi(zeta) - c_off``, checked
    against the exponential envelope at every step.

    ``P``/``Q`` default to the KYP solution with ``Q = I``. A step size that
    blows the distance up by more than ``1e6`` is halved, at most
    ``max_halvings`` times.
    """
    zeta0 = np.asarray(zeta0, dtype=np.float64)
    if Q is None:
        Q = np.eye(sys.dim)
    if P is None:
        P = kyp_solve(sys, Q).P
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    if zeta_star is None:
        zeta_star = smoothed_equilibrium(sys, sys.zeta_hint)
    zeta_star = np.asarray(zeta_star, dtype=np.float64)
    Ef = cho_factor(sys.E)
    f = lambda zz: cho_solve(Ef, sys.rhs(zz))  # noqa: E731
    eP = np.linalg.eigvalsh(0.5 * (P + P.T))
    qmin = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min())
    pmin, pmax = float(eP.min()), float(eP.max())
    if pmin <= 0 or qmin <= 0:
        raise ValueError("envelope needs positive definite P and Q")
    rate = qmin / pmax
    nominal_rate = 2.0 * qmin / pmin
    d0 = zeta0 - zeta_star
    V0 = 0.5 * float(d0 @ P @ d0)
    start = 0.5 * float(d0 @ d0)
    halvings = 0
    while True:
        steps = int(np.ceil(T_end / dt - 1e-9))
        traj = np.empty((steps + 1, sys.dim))
        traj[0] = zeta0
        zz = zeta0.copy()
        blown = False
        for i in range(steps):
            k1 = f(zz)
            k2 = f(zz + 0.5 * dt * k1)
            k3 = f(zz + 0.5 * dt * k2)
            k4 = f(zz + dt * k3)
            zz = zz + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            dd = zz - zeta_star
            if not np.all(np.isfinite(zz)) or 0.5 * dd @ dd > 1e6 * (start + 1.0):
                blown = True
                break
            traj[i + 1] = zz
        if not blown or halvings >= max_halvings:
            break
        dt *= 0.5
        halvings += 1
    if blown:
        raise RuntimeError(f"integration unstable after {halvings} step halvings")
    t = dt * np.arange(steps + 1)
    D = traj - zeta_star
    half_sq = 0.5 * np.einsum("ij,ij->i", D, D)
    bound = V0 / pmin * np.exp(-rate * t)
    nominal_bound = V0 / pmin * np.exp(-nominal_rate * t)
    viol = float(np.max(half_sq - bound))
    return EnvelopeResult(ok=bool(viol <= atol), t=t, half_sq_dist=half_sq, bound=bound,
                          nominal_bound=nominal_bound, rate=rate, nominal_rate=nominal_rate, dt=dt,
                          halvings=halvings, trajectory=traj, max_violation=viol,
                          nominal_ok=bool(np.all(half_sq <= nominal_bound + atol)))


# -- certificate --------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, float)):
        return None if not np.isfinite(v) else float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class StabilityCertificate:
    verdict: str  # "certified" | "not_certified" | "precondition_failure"
    reasons: list
    controllable: bool
    observable: bool | None
    kyp_status: str  # "ok" | "no_unique_solution" | "p_not_pd"
    P: np.ndarray | None
    Q: np.ndarray
    kyp_residual: float | None
    spr_ok: bool | None
    spr_margin: float | None
    sector: tuple
    sector_violations: int
    sector_bounded: bool
    envelope_ok: bool | None
    rate: float | None
    nominal_rate: float | None
    dim: int

    @property
    def minimal(self) -> bool:
        return bool(self.controllable and self.observable)

    def to_dict(self, include_matrices: bool = False) -> dict:
        out = {
            "format": "splitkit-stability", "version": 1, "verdict": self.verdict,
            "reasons": self.reasons, "dim": self.dim,
            "minimal": {"controllable": self.controllable, "observable": self.observable},
            "kyp": {"status": self.kyp_status, "residual": self.kyp_residual},
            "spr": {"ok": self.spr_ok, "margin": self.spr_margin},
            "sector": {"k_lower": self.sector[0], "k_upper": self.sector[1],
                       "violations": self.sector_violations, "bounded": self.sector_bounded},
            "envelope": {"ok": self.envelope_ok, "rate": self.rate,
                         "nominal_rate": self.nominal_rate},
        }
        if include_matrices:
            out["kyp"]["P"] = self.P
            out["kyp"]["Q"] = self.Q
        return _jsonable(out)

    def to_json(self, include_matrices: bool = False) -> str:
        return json.dumps(self.to_dict(include_matrices), indent=2, sort_keys=True)


def certify_system(sys: LureSystem, Q=None, zeta_star=None, zeta0=None,
                   phi_samples: int = 10_000, domain_radius: float = 1.0, T_end: float = 10.0,
                   dt: float = 1e-2, seed: int = 0) -> StabilityCertificate:
    """Run every check and summarize.

    ``certified`` requires minimality, a positive definite KYP solution,
    a positive SPR margin and a bounded sector without sampled violations;
    the envelope is then simulated as a cross-check. A singular Lyapunov
    operator or a non-PD ``P`` yields ``precondition_failure``.
    """
    d = sys.dim
    Q = np.eye(d) if Q is None else np.atleast_2d(Q)
    reasons = []
    P = res = None
    status = "ok"
    try:
        kyp = kyp_solve(sys, Q)
        P, res = kyp.P, kyp.residual
        sys.Omega = kyp.Omega
        if not kyp.p_pd:
            status = "p_not_pd"
            reasons.append("KYP solution P is not positive definite")
    except linalg.NoUniqueSolution as exc:
        status = "no_unique_solution"
        reasons.append("Lyapunov operator for E^-1 Gamma is singular (eigenvalues of E^-1 Gamma "
                       f"pair to zero; the linear block is lossless): {exc}")
    controllable, observable = minimality_check(sys)
    if not controllable:
        reasons.append("pair (E^-1 Gamma, E^-1 Sigma) is not controllable")
    if observable is False:
        reasons.append("pair (Omega, E^-1 Gamma) is not observable")
    if observable is None:
        reasons.append("observability undetermined: Omega comes from the KYP solution")

    if zeta_star is None and sys.phi is not None:
        try:
            zeta_star = smoothed_equilibrium(sys, sys.zeta_hint)
        except RuntimeError as exc:
            reasons.append(str(exc))
    center = zeta_star if zeta_star is not None else np.zeros(d)
    sec = sector_estimate(sys, phi_samples, domain_radius, center=center, seed=seed)
    if not sec.bounded:
        reasons.append("sampled sector is unbounded above")
    elif sec.violations:
        reasons.append(f"{sec.violations} sampled sector violations")

    spr_ok = margin = None
    if sys.Omega is not None and sec.bounded:
        spr = spr_check(sys, P, sec.k_lower, sec.k_upper)
        spr_ok, margin = spr.ok, spr.margin
        if not spr.ok:
            reasons.append(f"SPR test fails (margin {spr.margin:.3g} at omega={spr.worst_omega:.3g})")

    env_ok = rate = nominal_rate = None
    if status == "ok" and zeta_star is not None:
        z0 = (zeta_star + np.ones(d)) if zeta0 is None else np.asarray(zeta0, dtype=np.float64)
        env = envelope_simulate(sys, z0, T_end, dt, P=P, Q=Q, zeta_star=zeta_star)
        env_ok, rate, nominal_rate = env.ok, env.rate, env.nominal_rate
        if not env.ok:
            reasons.append(f"envelope violated by {env.max_violation:.3g}")

    if status != "ok":
        verdict = "precondition_failure"
    elif (controllable and observable and spr_ok and sec.bounded and sec.violations == 0):
        verdict = "certified"
    else:
        verdict = "not_certified"
    return StabilityCertificate(
        verdict=verdict, reasons=reasons, controllable=bool(controllable),
        observable=observable, kyp_status=status, P=P, Q=Q, kyp_residual=res,
        spr_ok=spr_ok, spr_margin=margin, sector=(sec.k_lower, sec.k_upper),
        sector_violations=sec.violations, sector_bounded=sec.bounded, envelope_ok=env_ok,
        rate=rate, nominal_rate=nominal_rate, dim=d)


def certify(prob: CompositeProblem, mu: float = 0.1, reference=None, **kw) -> StabilityCertificate:
    """Certificate for dfgpgd on ``prob``; ``reference`` is an ``(x*, z*, v*)`` start
    for the smoothed equilibrium solve (computed when omitted)."""
    if reference is None:
        from .analysis import reference_solution
        ref = reference_solution(prob)
        reference = (ref.x, ref.z, ref.v)
    x, z, v = (np.asarray(a, dtype=np.float64) for a in reference)
    w = np.linalg.solve(prob.L, v / prob.lam)
    sys = build_lure(prob, mu, zeta_hint=np.concatenate([x, z, w]))
    return certify_system(sys, **kw)
