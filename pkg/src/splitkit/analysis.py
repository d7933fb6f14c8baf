"""Reference solutions, the running-average convergence bound, relative
error metrics and the energy-proxy sweep."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import solvers
from .problem import CompositeProblem, LassoSpec, generate_lasso, objective
from .prox import soft_threshold
from .solvers import Scheme, SolverConfig, SCHEMA_LINE

__all__ = [
    "ReferenceSolution", "reference_solution", "BoundReport", "theorem1_bound",
    "relative_error", "relative_errors", "EnergyModel", "SweepTable",
    "power_error_sweep", "iterations_to_target", "worker_count", "SWEEP_COLUMNS",
]


# -- reference solution -------------------------------------------------------

@dataclass
class ReferenceSolution:
    x: np.ndarray
    z: np.ndarray
    v: np.ndarray
    f: float
    converged: bool
    iterations: int

    def __iter__(self):  # unpacks as (x*, z*, f*)
        return iter((self.x, self.z, self.f))


def reference_solution(prob: CompositeProblem, max_iter: int = 50_000, ftol: float = 1e-14,
                       rtol: float = 1e-10) -> ReferenceSolution:
    """Long-run float64 classical ADMM on ``prob`` (``L = I``).

    Stops once the objective changes by less than ``ftol`` (relative) and
    both the primal residual and the step in ``z`` are below ``rtol``
    (relative). The final iterate is returned; ``converged`` is False when
    the budget ran out first.
    """
    lam = prob.lam
    BtB = prob.B.T @ prob.B / lam
    lz = float(np.mean(np.diag(BtB)))
    if not np.allclose(BtB, lz * np.eye(prob.n_z), rtol=1e-10, atol=1e-12):
        raise ValueError("reference solver needs B^T B proportional to the identity")
    F = cho_factor(prob.hess + prob.A.T @ prob.A / lam)
    A, B, c = prob.A, prob.B, prob.c
    x = np.zeros(prob.n)
    z = np.zeros(prob.n_z)
    v = np.zeros(prob.p)
    tau = prob.gamma / lz
    f_old = objective(prob, x, z)
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        x = cho_solve(F, prob.lin - A.T @ (B @ z - c + v) / lam)
        Ax = A @ x
        z_new = soft_threshold(-(B.T @ (Ax - c + v)) / (lam * lz), tau)
        r = Ax + B @ z_new - c
        v = v + r
        dz = np.linalg.norm(z_new - z)
        z = z_new
        f = objective(prob, x, z)
        scale = max(1.0, np.linalg.norm(x), np.linalg.norm(z))
        if (abs(f - f_old) < ftol * max(1.0, abs(f)) and np.linalg.norm(r) < rtol * scale
                and dz < rtol * scale):
            converged = True
            break
        f_old = f
    return ReferenceSolution(x, z, v, objective(prob, x, z), converged, k)


# -- running-average bound ----------------------------------------------------

@dataclass
class BoundReport:
    """Per-iteration sides of the bound; index ``k`` covers iterates 1..k+1."""

    lhs: np.ndarray
    rhs: np.ndarray
    suboptimality: np.ndarray
    coupling: np.ndarray
    init_term: np.ndarray
    error_sum_g: np.ndarray
    error_sum_h: np.ndarray
    residual_inner_products: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    def holds(self, tol: float = 1e-8) -> bool:
        return bool(np.all(self.slack >= -tol))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_LINE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = ["k", "lhs", "rhs", "slack", "suboptimality", "coupling", "init_term",
                "error_sum_g", "error_sum_h", "residual_inner_products"]
        w.writerow(cols)
        for i in range(self.lhs.size):
            w.writerow([i + 1] + [repr(float(getattr(self, c)[i])) for c in cols[1:]])
        return buf.getvalue()


def theorem1_bound(trace: solvers.SolverTrace, prob: CompositeProblem, x_star, z_star,
                   f_star: float | None = None) -> BoundReport:
    """Evaluate both sides of the running-average bound along ``trace``.

    With ``res_i = A x^i + B z^i - (A x* + B z*)`` and
    ``u2^i = v^i + B (z^{i-1} - z^i)``, for ``K = k + 1``::

        LHS = mean_i f(x^i, z^i) - f*  +  mean_i <(1/lam) L u2^i, res_i>
        RHS = [ ||x^0 - x*||^2_{W} + ||x^K - x*||^2_{H_g} + (1/lam) ||x^K - x*||^2_{A^T L A}
                + lambda_z ||z^0 - z*||^2 ] / (2K)
              + [ sum eps_g + sum eps_h - <M_x r_x^K, x^K - x*> - <r_z^K, z^K - z*> ] / K

    where the means run over ``i = 1..K`` and ``W = H_g + Lambda_1``, which is
    ``lambda_x I`` for dfgpgd.
    """
    if not trace.has_snapshots:
        raise ValueError("trace has no snapshots; run with record_trace=True")
    x_star = np.asarray(x_star, dtype=np.float64)
    z_star = np.asarray(z_star, dtype=np.float64)
    if f_star is None:
        f_star = objective(prob, x_star, z_star)
    L, M_x, _ = solvers.scheme_weights(prob, trace.scheme)
    lam = prob.lam
    X = np.array(trace.xs)
    Z = np.array(trace.zs)
    V = np.array(trace.vs)
    K = X.shape[0] - 1
    cnt = np.arange(1, K + 1, dtype=np.float64)

    f_vals = np.array([objective(prob, X[i], Z[i]) for i in range(1, K + 1)])
    target = prob.A @ x_star + prob.B @ z_star
    res = X[1:] @ prob.A.T + Z[1:] @ prob.B.T - target
    U2 = V[1:] + (Z[:-1] - Z[1:]) @ prob.B.T
    inner = np.einsum("ij,ij->i", U2 @ L.T, res) / lam
    suboptimality = np.cumsum(f_vals) / cnt - f_star
    coupling = np.cumsum(inner) / cnt

    dx0 = X[0] - x_star
    if trace.scheme is Scheme.DFGPGD:
        w0 = prob.lambda_x * float(dx0 @ dx0)
    else:
        W = prob.hess + prob.A.T @ L @ prob.A / lam + (0.0 if M_x is None else M_x)
        w0 = float(dx0 @ W @ dx0)
    dz0 = Z[0] - z_star
    DX = X[1:] - x_star
    ALA = prob.A.T @ L @ prob.A
    quad = (np.einsum("ij,ij->i", DX @ prob.hess, DX)
            + np.einsum("ij,ij->i", DX @ ALA, DX) / lam)
    init_term = (w0 + quad + prob.lambda_z * float(dz0 @ dz0)) / (2.0 * cnt)

    eps_g = np.cumsum([r["eps_g"] for r in trace.rows])
    eps_h = np.cumsum([r["eps_h"] for r in trace.rows])
    RX = np.array(trace.r_x[1:])
    RZ = np.array(trace.r_z[1:])
    MRX = np.zeros_like(RX) if M_x is None else RX @ M_x.T
    rip = np.einsum("ij,ij->i", MRX, DX) + np.einsum("ij,ij->i", RZ, Z[1:] - z_star)
    rhs = init_term + (eps_g + eps_h - rip) / cnt
    return BoundReport(lhs=suboptimality + coupling, rhs=rhs, suboptimality=suboptimality,
                       coupling=coupling, init_term=init_term, error_sum_g=eps_g,
                       error_sum_h=eps_h, residual_inner_products=rip)


# -- error metrics ------------------------------------------------------------

def relative_error(f: float, f_star: float, metric: str = "caption") -> float:
    """Relative error in percent.

    ``caption``: ``100 |f - f*| / f*``; ``text``: ``100 (f - f*) / f``.
    """
    if metric == "caption":
        if not f_star > 0:
            raise ValueError("caption metric needs f* > 0")
        return 100.0 * abs(f - f_star) / f_star
    if metric == "text":
        if not f > 0:
            raise ValueError("text metric needs f > 0")
        return 100.0 * (f - f_star) / f
    raise ValueError(f"unknown metric {metric!r}")


def relative_errors(f, f_star):
    """``(caption, text)`` metrics, vectorized over ``f``."""
    f = np.asarray(f, dtype=np.float64)
    if not f_star > 0 or np.any(f <= 0):
        raise ValueError("relative errors need positive objectives")
    return 100.0 * np.abs(f - f_star) / f_star, 100.0 * (f - f_star) / f


# -- energy proxy sweep -------------------------------------------------------

@dataclass(frozen=True)
class EnergyModel:
    """Per-iteration dynamic-power constants (W) standing in for measurements."""

    watts_per_iter_admm: float = 8.8e-3
    watts_per_iter_dfgpgd: float = 3.8e-3

    def __post_init__(self):
        if not (self.watts_per_iter_admm > 0 and self.watts_per_iter_dfgpgd > 0):
            raise ValueError("per-iteration power must be positive")

    def watts(self, scheme) -> float:
        if Scheme(scheme) is Scheme.DFGPGD:
            return self.watts_per_iter_dfgpgd
        return self.watts_per_iter_admm

    def energy(self, scheme, max_iter: int) -> float:
        return max_iter * self.watts(scheme)


SWEEP_COLUMNS = ("scheme", "seed", "max_iter", "rel_err_caption", "rel_err_text", "energy_w")


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # (scheme value, seed) -> caption metric per k
    f_star: dict = field(default_factory=dict)  # seed -> f*
    unconverged: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA_LINE + "\n")
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in SWEEP_COLUMNS})
        return buf.getvalue()

    def select(self, scheme, max_iter=None) -> list:
        s = Scheme(scheme).value
        return [r for r in self.rows if r["scheme"] == s
                and (max_iter is None or r["max_iter"] == max_iter)]


def worker_count(requested: int | None = None) -> int:
    """Worker processes: ``requested``, capped by ``SPLITKIT_THREADS`` and the CPU count."""
    cap = os.environ.get("SPLITKIT_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, os.cpu_count() or 1))


def _sweep_instance(args):
    spec, seed, schemes, max_iters, energy, force = args
    inst = LassoSpec(**{**spec.__dict__, "seed": seed})
    prob, _ = generate_lasso(inst, force=force)
    ref = reference_solution(prob)
    kmax = max(max_iters)
    rows, curves = [], {}
    for sch in schemes:
        tr = solvers.run(prob, SolverConfig(scheme=sch, max_iter=kmax))
        f = tr.column("objective")
        cap, txt = relative_errors(f, ref.f)
        curves[(sch.value, seed)] = cap
        for K in max_iters:
            rows.append({"scheme": sch.value, "seed": seed, "max_iter": int(K),
                         "rel_err_caption": float(cap[K - 1]), "rel_err_text": float(txt[K - 1]),
                         "energy_w": energy.energy(sch, K)})
    return rows, curves, seed, ref.f, ref.converged


def power_error_sweep(spec: LassoSpec, schemes=(Scheme.CLASSICAL_ADMM, Scheme.DFGPGD),
                      max_iters=(10, 50, 100, 150, 200, 250, 300),
                      energy: EnergyModel | None = None, n_experiments: int = 151,
                      workers: int | None = None, force: bool = False) -> SweepTable:
    """Run every scheme on ``n_experiments`` seeded instances.

    Instance ``i`` uses seed ``spec.seed + i``. Runs have a fixed trip
    count, so each scheme runs once to ``max(max_iters)`` and the shorter
    budgets are read off the same trace.
    """
    if n_experiments < 1:
        raise ValueError("n_experiments must be >= 1")
    max_iters = sorted({int(k) for k in max_iters})
    if max_iters[0] < 1:
        raise ValueError("iteration budgets must be >= 1")
    energy = energy or EnergyModel()
    schemes = [Scheme(s) for s in schemes]
    jobs = [(spec, spec.seed + i, schemes, max_iters, energy, force) for i in range(n_experiments)]
    nw = worker_count(workers)
    if nw == 1:
        results = map(_sweep_instance, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=nw)
        results = pool.map(_sweep_instance, jobs)
    table = SweepTable()
    by_seed = {}
    for rows, curves, seed, f_star, ok in results:
        by_seed[seed] = rows
        table.curves.update(curves)
        table.f_star[seed] = f_star
        if not ok:
            table.unconverged.append(seed)
    if nw > 1:
        pool.shutdown()
    for seed in sorted(by_seed):
        table.rows.extend(by_seed[seed])
    return table


def iterations_to_target(curve, target: float, settled: bool = False) -> float:
    """First iteration (1-based) whose error is at most ``target``; ``inf`` if never.

    With ``settled=True`` the error must also stay at or below ``target`` for
    the rest of the curve, so transient dips (an infeasible iterate whose
    objective happens to pass through ``f*``) do not count.
    """
    above = np.asarray(curve) > target
    if not settled:
        hit = np.flatnonzero(~above)
        return float(hit[0] + 1) if hit.size else float("inf")
    if above.size == 0 or above[-1]:
        return float("inf")
    bad = np.flatnonzero(above)
    return float(bad[-1] + 2) if bad.size else 1.0
