"""Iteration schemes for ``min g(x) + h(z) s.t. Ax + Bz = c``.

Four schemes share one state layout:

* ``admm``      classical ADMM (``L = I``, no proximal terms),
* ``wl-admm``   augmented term weighted by ``L``,
* ``wlm-admm``  ``wl-admm`` plus proximal penalties ``||x - x^k||^2_{M_x}`` and
  ``||z - z^k||^2_{M_z}``,
* ``dfgpgd``    the ``wlm-admm`` instance with
  ``M_x = lambda_x I - H_g - (1/lam) A^T L A``, which turns the x-update into a
  gradient step driven by the cached constraint residual (no linear solve).

The three ADMM variants solve their x-update with a Cholesky factor cached
at setup. All z-updates are soft-thresholds, which requires
``Lambda_2 = (1/lam) B^T L B + M_z`` to be a multiple of the identity.
Steps run on a pluggable arithmetic backend (float64 or fixed-point).
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg, prox
from .arithmetic import FlopCounter, make_arithmetic
from .problem import CompositeProblem, constraint_residual, objective

__all__ = [
    "Scheme", "SolverConfig", "SolverState", "SolverTrace", "Solver", "SetupError",
    "run", "flop_model", "initial_state", "step_classical_admm", "step_wl_admm",
    "step_wlm_admm", "step_dfgpgd", "TRACE_COLUMNS", "scheme_weights", "build_cache",
]

SCHEMA_LINE = "# splitkit-schema v1"


class Scheme(enum.Enum):
    CLASSICAL_ADMM = "admm"
    WL_ADMM = "wl-admm"
    WLM_ADMM = "wlm-admm"
    DFGPGD = "dfgpgd"


class SetupError(ValueError):
    """Problem parameters violate a scheme's preconditions."""


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme = Scheme.DFGPGD
    max_iter: int = 100
    arithmetic: object = "float64"  # "float64" | QFormat | "Q16.8"
    error_x: prox.ErrorModel = field(default_factory=prox.ErrorModel)
    error_z: prox.ErrorModel = field(default_factory=prox.ErrorModel)
    record_trace: bool = False
    reference: tuple | None = None  # (x*, z*) added to audit probe sets

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolverState:
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    k: int = 0
    u: np.ndarray | None = None      # last dual feedback (dfgpgd)
    resid: np.ndarray | None = None  # cached A x + B z - c (dfgpgd)
    Bz: np.ndarray | None = None     # cached B z (dfgpgd)
    cache: dict | None = None


# -- setup ------------------------------------------------------------------

def _scalar_of(M, what) -> float:
    lz = float(np.mean(np.diag(M)))
    if not np.allclose(M, lz * np.eye(M.shape[0]), rtol=1e-10, atol=1e-12):
        raise SetupError(f"{what} must be a multiple of the identity for the soft-threshold z-update")
    if lz <= 0:
        raise SetupError(f"{what} must be positive definite")
    return lz


def _pd_or_raise(S, what):
    if not linalg.is_positive_definite(S):
        raise linalg.NotPositiveDefinite(f"{what} is not positive definite")


def scheme_weights(prob: CompositeProblem, scheme):
    """``(L, M_x, M_z)`` a scheme uses on ``prob``; ``None`` means zero."""
    scheme = Scheme(scheme)
    L = np.eye(prob.p) if scheme is Scheme.CLASSICAL_ADMM else prob.L
    if scheme in (Scheme.CLASSICAL_ADMM, Scheme.WL_ADMM):
        return L, None, None
    sub = prob.with_params(L=L)
    M_z = prob.M_z if prob.M_z is not None else sub.scalar_Mz()
    M_x = prob.M_x if scheme is Scheme.WLM_ADMM else sub.dfgpgd_Mx()
    return L, M_x, M_z


def build_cache(prob: CompositeProblem, scheme: Scheme, ar) -> dict:
    scheme = Scheme(scheme)
    L, M_x, M_z = scheme_weights(prob, scheme)
    _pd_or_raise(L, "L")
    lam = prob.lam
    cache = {"scheme": scheme, "ar": ar, "A": ar.mat(prob.A), "B": ar.mat(prob.B),
             "c": ar.vec(prob.c), "lin": ar.vec(prob.lin)}
    ALA = prob.A.T @ L @ prob.A
    BLB = prob.B.T @ L @ prob.B
    Lambda1 = ALA / lam + (0.0 if M_x is None else M_x)
    Lambda2 = BLB / lam + (0.0 if M_z is None else M_z)
    if scheme is Scheme.DFGPGD:
        # Lambda_1 = lambda_x I - H_g, positive definite exactly when this holds
        if not prob.lambda_x > prob.hess_norm:
            raise SetupError(f"dfgpgd needs lambda_x > ||H_g||_2 = {prob.hess_norm:.6g}"
                             f" (got {prob.lambda_x:.6g})")
    else:
        _pd_or_raise(Lambda1, "Lambda_1")
    lz = _scalar_of(Lambda2, "Lambda_2")
    cache.update(Lambda1=Lambda1, lz=lz, tau=ar.const(prob.gamma / lz),
                 L=L, M_x=M_x, M_z=M_z)
    if scheme is Scheme.DFGPGD:
        cache.update(
            hess=ar.mat(prob.hess),
            inv_lx=ar.const(1.0 / prob.lambda_x),
            ATL=ar.mat(prob.A.T @ L),
            inv_lxlam=ar.const(1.0 / (prob.lambda_x * lam)),
            Kz=ar.mat(prob.B.T @ L / (lz * lam)),
        )
    else:
        cache.update(
            factor=ar.factor(prob.hess + Lambda1),
            ATL=ar.mat(prob.A.T @ L),
            inv_lam=ar.const(1.0 / lam),
            KB=ar.mat(prob.B.T @ L / lam),
            Mx=None if M_x is None or not np.any(M_x) else ar.mat(M_x),
            Mz=None if M_z is None or not np.any(M_z) else ar.mat(M_z),
            inv_lz=ar.const(1.0 / lz),
            neg_inv_lz=ar.const(-1.0 / lz),
        )
    return cache


def initial_state(prob: CompositeProblem, scheme=Scheme.DFGPGD, ar=None,
                  x0=None, z0=None, v0=None) -> SolverState:
    """Zero start unless given; builds and attaches the scheme cache."""
    ar = ar or make_arithmetic("float64")
    scheme = Scheme(scheme)
    with ar.counter.scope("setup"):
        cache = build_cache(prob, scheme, ar)
        x = ar.vec(np.zeros(prob.n) if x0 is None else x0)
        z = ar.vec(np.zeros(prob.n_z) if z0 is None else z0)
        v = ar.vec(np.zeros(prob.p) if v0 is None else v0)
        st = SolverState(x=x, z=z, v=v, cache=cache)
        if scheme is Scheme.DFGPGD:
            st.Bz = ar.matvec(cache["B"], z)
            st.resid = ar.sub(ar.add(ar.matvec(cache["A"], x), st.Bz), cache["c"])
    return st


# -- updates ----------------------------------------------------------------

def _x_admm(st, C, ar):
    t = ar.add(ar.sub(ar.matvec(C["B"], st.z), C["c"]), st.v)
    w = ar.scale(C["inv_lam"], ar.matvec(C["ATL"], t))
    if C["Mx"] is None:
        rhs = ar.sub(C["lin"], w)
    else:
        rhs = ar.add(C["lin"], ar.sub(ar.matvec(C["Mx"], st.x), w))
    return ar.solve(C["factor"], rhs), None


def _x_dfgpgd(st, C, ar):
    u = ar.add(st.resid, st.v)  # cached A x + B z - c, fed back
    grad = ar.sub(ar.matvec(C["hess"], st.x), C["lin"])
    x = ar.sub(st.x, ar.scale(C["inv_lx"], grad))
    return ar.sub(x, ar.scale(C["inv_lxlam"], ar.matvec(C["ATL"], u))), u


def _z_admm(st, x_new, C, ar):
    Ax = ar.matvec(C["A"], x_new)
    w = ar.matvec(C["KB"], ar.add(ar.sub(Ax, C["c"]), st.v))
    if C["Mz"] is None:  # gamma_2 = -(1/lam) B^T L (A x - c + v)
        return ar.scale(C["neg_inv_lz"], w), Ax
    return ar.scale(C["inv_lz"], ar.sub(ar.matvec(C["Mz"], st.z), w)), Ax


def _z_dfgpgd(st, x_new, C, ar):
    Ax = ar.matvec(C["A"], x_new)
    s = ar.add(ar.sub(ar.add(Ax, st.Bz), C["c"]), st.v)
    return ar.sub(st.z, ar.matvec(C["Kz"], s)), Ax


def _step(prob, st: SolverState, perturb_x=None, perturb_z=None):
    C = st.cache
    ar = C["ar"]
    scheme = C["scheme"]
    cnt = ar.counter
    with cnt.scope("x"):
        if scheme is Scheme.DFGPGD:
            x_bar, u = _x_dfgpgd(st, C, ar)
        else:
            x_bar, u = _x_admm(st, C, ar)
    x, eps_g, r_x = (x_bar, 0.0, None) if perturb_x is None else perturb_x(x_bar, st)
    with cnt.scope("z"):
        if scheme is Scheme.DFGPGD:
            pre, Ax = _z_dfgpgd(st, x, C, ar)
        else:
            pre, Ax = _z_admm(st, x, C, ar)
        z_bar = ar.soft(pre, C["tau"])
    z, eps_h, r_z = (z_bar, 0.0, None) if perturb_z is None else perturb_z(z_bar, pre, st)
    with cnt.scope("v"):
        Bz = ar.matvec(C["B"], z)
        resid = ar.sub(ar.add(Ax, Bz), C["c"])
        v = ar.add(st.v, resid)
    new = replace(st, x=x, z=z, v=v, k=st.k + 1, u=u)
    if scheme is Scheme.DFGPGD:
        new.resid, new.Bz = resid, Bz
    return new, {"eps_g": eps_g, "eps_h": eps_h, "r_x": r_x, "r_z": r_z}


def _functional_step(scheme, state, prob):
    if state.cache is None or state.cache["scheme"] is not scheme:
        fresh = initial_state(prob, scheme, x0=state.x, z0=state.z, v0=state.v)
        state = replace(fresh, k=state.k)
    return _step(prob, state)[0]


def step_classical_admm(state: SolverState, prob: CompositeProblem) -> SolverState:
    return _functional_step(Scheme.CLASSICAL_ADMM, state, prob)


def step_wl_admm(state: SolverState, prob: CompositeProblem) -> SolverState:
    return _functional_step(Scheme.WL_ADMM, state, prob)


def step_wlm_admm(state: SolverState, prob: CompositeProblem) -> SolverState:
    return _functional_step(Scheme.WLM_ADMM, state, prob)


def step_dfgpgd(state: SolverState, prob: CompositeProblem) -> SolverState:
    return _functional_step(Scheme.DFGPGD, state, prob)


# -- driver -------------------------------------------------------------------

TRACE_COLUMNS = ("k", "objective", "constraint_residual", "eps_g", "eps_h",
                 "flops_cumulative", "flops_measured_cumulative", "flops_x")


@dataclass
class SolverTrace:
    scheme: Scheme
    arithmetic: str
    rows: list = field(default_factory=list)
    xs: list = field(default_factory=list)   # snapshots, index = iteration
    zs: list = field(default_factory=list)
    vs: list = field(default_factory=list)
    r_x: list = field(default_factory=list)
    r_z: list = field(default_factory=list)
    solves: int = 0
    factorizations: int = 0
    final: SolverState | None = None
    x_final: np.ndarray | None = None
    z_final: np.ndarray | None = None
    v_final: np.ndarray | None = None

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    @property
    def has_snapshots(self) -> bool:
        return len(self.xs) == len(self.rows) + 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_LINE + "\n")
        w = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(float(r[k])) if isinstance(r[k], float) else r[k])
                        for k in TRACE_COLUMNS})
        return buf.getvalue()


class Solver:
    """Runs one scheme with its own counter, error streams and trace."""

    def __init__(self, prob: CompositeProblem, config: SolverConfig, x0=None, z0=None, v0=None):
        self.prob = prob
        self.config = config
        self.counter = FlopCounter()
        self.ar = make_arithmetic(config.arithmetic, self.counter)
        self.state = initial_state(prob, config.scheme, self.ar, x0, z0, v0)
        self._rng_x = np.random.default_rng([config.error_x.seed, 1])
        self._rng_z = np.random.default_rng([config.error_z.seed, 2])
        ref = config.reference
        self._ref_x = None if ref is None else np.asarray(ref[0], dtype=np.float64)
        self._ref_z = None if ref is None else np.asarray(ref[1], dtype=np.float64)
        self._g = prox.quadratic_batch(prob.H, prob.b, prob.quad_weight)
        self._h = prox.l1_batch(prob.gamma)

    # error hooks: audited injection in float64, then back to the backend
    def _perturb_x(self, x_bar, st):
        model = self.config.error_x
        k = st.k + 1
        if not model.active:
            return x_bar, 0.0, np.zeros(self.prob.n)
        xb = self.ar.to_float(x_bar)
        w_bar = self.prob.hess @ xb - self.prob.lin
        probes = prox.neighborhood_probes(xb, self._rng_x, model.n_probes, model.probe_radius,
                                          extra=[self._ref_x])
        audit = prox.SlackAudit(self._g, xb, w_bar, self.state.cache["Lambda1"], probes)
        res = prox.inject_error(xb, model, k, audit, self._rng_x)
        return self.ar.vec(res.point), res.epsilon, res.r

    def _perturb_z(self, z_bar, pre, st):
        model = self.config.error_z
        k = st.k + 1
        if not model.active:
            return z_bar, 0.0, np.zeros(self.prob.n_z)
        lz = self.state.cache["lz"]
        zb = self.ar.to_float(z_bar)
        w_bar = lz * (self.ar.to_float(pre) - zb)
        probes = prox.neighborhood_probes(zb, self._rng_z, model.n_probes, model.probe_radius,
                                          extra=[self._ref_z])
        audit = prox.SlackAudit(self._h, zb, w_bar, lz, probes)
        res = prox.inject_error(zb, model, k, audit, self._rng_z)
        return self.ar.vec(res.point), res.epsilon, res.r

    def step(self) -> dict:
        self.state, info = _step(self.prob, self.state, self._perturb_x, self._perturb_z)
        return info

    def run(self) -> SolverTrace:
        cfg = self.config
        ar = self.ar
        tr = SolverTrace(cfg.scheme, ar.name)
        snap = cfg.record_trace

        def record(st, rx, rz):
            tr.xs.append(ar.to_float(st.x).copy())
            tr.zs.append(ar.to_float(st.z).copy())
            tr.vs.append(ar.to_float(st.v).copy())
            tr.r_x.append(rx)
            tr.r_z.append(rz)

        if snap:
            record(self.state, np.zeros(self.prob.n), np.zeros(self.prob.n_z))
        for _ in range(int(cfg.max_iter)):
            x_before = self.counter.sections["x"][:]
            info = self.step()
            x_after = self.counter.sections["x"]
            st = self.state
            xf, zf = ar.to_float(st.x), ar.to_float(st.z)
            tr.rows.append({
                "k": st.k,
                "objective": objective(self.prob, xf, zf),
                "constraint_residual": constraint_residual(self.prob, xf, zf),
                "eps_g": float(info["eps_g"]),
                "eps_h": float(info["eps_h"]),
                "flops_cumulative": self.counter.charged,
                "flops_measured_cumulative": self.counter.measured,
                "flops_x": x_after[1] - x_before[1],
                "flops_x_measured": x_after[0] - x_before[0],
            })
            if snap:
                record(st, info["r_x"], info["r_z"])
        tr.solves = self.counter.solves
        tr.factorizations = self.counter.factorizations
        tr.final = self.state
        tr.x_final = ar.to_float(self.state.x)
        tr.z_final = ar.to_float(self.state.z)
        tr.v_final = ar.to_float(self.state.v)
        return tr


def run(prob: CompositeProblem, config: SolverConfig, x0=None, z0=None, v0=None) -> SolverTrace:
    """Fixed trip count: exactly ``config.max_iter`` steps, deterministic given seeds."""
    return Solver(prob, config, x0, z0, v0).run()


def flop_model(scheme, n: int) -> int:
    """Per-iteration x-update flops claimed for each scheme (consensus splitting)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if Scheme(scheme) is Scheme.DFGPGD:
        return 4 * n * n + 6 * n
    return n ** 3 + 4 * n * n + 5 * n
