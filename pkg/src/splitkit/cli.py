"""``splitkit`` command line: generate | solve | sweep | bound | stability.

Every subcommand accepts ``--config FILE`` (JSON); flags given on the
command line override the file. Exit codes: 0 success, 1 runtime failure,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, fixedpoint, problem, prox, solvers, stability

log = logging.getLogger("splitkit")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


# -- configuration ------------------------------------------------------------

PROBLEM_DEFAULTS = {"n": 700, "m": 270, "s": 20, "seed": 1, "gamma": None,
                    "noise_sigma": 0.0, "half_quadratic": True, "lam": 1.0,
                    "lambda_z": 1.0, "lambda_x": None}
SOLVER_DEFAULTS = {"scheme": "dfgpgd", "max_iter": 100, "arithmetic": "float64",
                   "overflow": "saturate", "quantize": "truncate",
                   "error_x": None, "error_z": None}
SWEEP_DEFAULTS = {"max_iters": [10, 50, 100, 150, 200, 250, 300], "n_experiments": 151,
                  "schemes": ["admm", "dfgpgd"], "workers": None}


@dataclass
class ExperimentConfig:
    problem: dict | str = field(default_factory=lambda: dict(PROBLEM_DEFAULTS))
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    energy: dict = field(default_factory=dict)
    output_dir: str = "."
    sweep: dict = field(default_factory=lambda: dict(SWEEP_DEFAULTS))
    force: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {"problem", "solver", "energy", "output_dir", "sweep", "force"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        prob = d.get("problem", {})
        if isinstance(prob, dict):
            prob = {**PROBLEM_DEFAULTS, **prob}
        elif not isinstance(prob, str):
            raise UsageError("'problem' must be an object or a path")
        return cls(problem=prob, solver={**SOLVER_DEFAULTS, **d.get("solver", {})},
                   energy=dict(d.get("energy", {})), output_dir=d.get("output_dir", "."),
                   sweep={**SWEEP_DEFAULTS, **d.get("sweep", {})}, force=bool(d.get("force", False)))

    def to_dict(self) -> dict:
        return {"problem": self.problem, "solver": self.solver, "energy": self.energy,
                "output_dir": self.output_dir, "sweep": self.sweep, "force": self.force}

    def validate(self):
        if isinstance(self.problem, str) and not Path(self.problem).is_file():
            raise UsageError(f"problem file not found: {self.problem}")
        if isinstance(self.problem, dict) and self.problem.get("seed") is None:
            raise UsageError("problem seed must be explicit")

    def lasso_spec(self) -> problem.LassoSpec:
        keys = problem.LassoSpec.__dataclass_fields__
        try:
            return problem.LassoSpec(**{k: v for k, v in self.problem.items() if k in keys})
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc

    def load_problem(self):
        if isinstance(self.problem, str):
            return problem.load_problem(self.problem)
        return problem.generate_lasso(self.lasso_spec(), force=self.force)

    def arithmetic(self):
        a = self.solver["arithmetic"]
        if a in (None, "float64"):
            return "float64"
        try:
            return fixedpoint.QFormat.parse(a, self.solver["overflow"], self.solver["quantize"])
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def solver_config(self, record_trace=False, reference=None) -> solvers.SolverConfig:
        s = self.solver
        try:
            return solvers.SolverConfig(
                scheme=solvers.Scheme(s["scheme"]), max_iter=int(s["max_iter"]),
                arithmetic=self.arithmetic(), error_x=prox.ErrorModel.from_dict(s["error_x"]),
                error_z=prox.ErrorModel.from_dict(s["error_z"]), record_trace=record_trace,
                reference=reference)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc

    def energy_model(self) -> analysis.EnergyModel:
        try:
            return analysis.EnergyModel(**self.energy)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc


def _set(d: dict, key, value):
    if value is not None:
        d[key] = value


def build_config(args) -> ExperimentConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
    cfg = ExperimentConfig.from_dict(raw)
    if getattr(args, "problem", None):
        cfg.problem = args.problem
    if isinstance(cfg.problem, dict):
        for k in ("n", "m", "s", "seed", "gamma", "lam", "lambda_z", "lambda_x"):
            _set(cfg.problem, k, getattr(args, k, None))
        _set(cfg.problem, "noise_sigma", getattr(args, "noise", None))
    s = cfg.solver
    _set(s, "scheme", getattr(args, "scheme", None))
    _set(s, "max_iter", getattr(args, "max_iter", None))
    _set(s, "arithmetic", getattr(args, "arith", None))
    _set(s, "overflow", getattr(args, "overflow", None))
    _set(s, "quantize", getattr(args, "quantize", None))
    if getattr(args, "eps0", None) is not None:
        for side, off in (("error_x", 0), ("error_z", 1)):
            s[side] = {"kind": args.error_kind, "epsilon0": args.eps0,
                       "schedule": args.schedule, "seed": args.error_seed + off}
    _set(cfg.energy, "watts_per_iter_admm", getattr(args, "watts_admm", None))
    _set(cfg.energy, "watts_per_iter_dfgpgd", getattr(args, "watts_dfgpgd", None))
    _set(cfg.sweep, "n_experiments", getattr(args, "n_experiments", None))
    _set(cfg.sweep, "workers", getattr(args, "workers", None))
    if getattr(args, "max_iters", None) is not None:
        cfg.sweep["max_iters"] = _int_list(args.max_iters)
    if getattr(args, "schemes", None) is not None:
        cfg.sweep["schemes"] = [t for t in args.schemes.split(",") if t]
    if getattr(args, "out_dir", None):
        cfg.output_dir = args.out_dir
    if getattr(args, "force", False):
        cfg.force = True
    cfg.validate()
    return cfg


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _out(cfg: ExperimentConfig, name: str) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = build_config(args)
    if not isinstance(cfg.problem, dict):
        raise UsageError("generate needs problem dimensions, not a problem file")
    prob, x_true = cfg.load_problem()
    path = Path(args.out) if args.out else _out(cfg, "problem.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    problem.save_problem(prob, path, x_true)
    print(path)
    return EXIT_OK


def _reference(prob):
    ref = analysis.reference_solution(prob)
    if not ref.converged:
        log.warning("reference solution did not reach tolerance in %d iterations", ref.iterations)
    return ref


def cmd_solve(args) -> int:
    cfg = build_config(args)
    prob, _ = cfg.load_problem()
    sc = cfg.solver_config()
    ref = _reference(prob)
    sc = solvers.SolverConfig(**{**sc.__dict__, "reference": (ref.x, ref.z)})
    tr = solvers.run(prob, sc)
    _out(cfg, "trace.csv").write_text(tr.to_csv())
    f = tr.rows[-1]["objective"]
    energy = cfg.energy_model()
    summary = {
        "config": cfg.to_dict(), "scheme": sc.scheme.value, "arithmetic": tr.arithmetic,
        "iterations": len(tr.rows), "objective": f, "f_star": ref.f,
        "reference_converged": ref.converged,
        "rel_err_caption": analysis.relative_error(f, ref.f, "caption") if ref.f > 0 else None,
        "rel_err_text": analysis.relative_error(f, ref.f, "text") if f > 0 else None,
        "flops_charged": tr.rows[-1]["flops_cumulative"],
        "flops_measured": tr.rows[-1]["flops_measured_cumulative"],
        "flops_x_per_iter": tr.rows[-1]["flops_x"],
        "linear_solves": tr.solves,
        "energy_w": energy.energy(sc.scheme, len(tr.rows)),
    }
    _write_json(_out(cfg, "summary.json"), summary)
    return EXIT_OK if np.isfinite(f) else EXIT_RUNTIME


GNUPLOT = """# splitkit power/error plot script
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set xlabel 'relative error (%)'
set ylabel 'dynamic power proxy (W)'
set logscale x
plot '{csv}' using (strcol(1) eq 'admm' ? $4 : 1/0):6 with points title 'ADMM', \\
     '{csv}' using (strcol(1) eq 'dfgpgd' ? $4 : 1/0):6 with points title 'DFGPGD'
"""


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if not isinstance(cfg.problem, dict):
        raise UsageError("sweep generates its own instances; give dimensions, not a file")
    sw = cfg.sweep
    if not sw["max_iters"]:
        raise UsageError("max_iters must not be empty")
    if any(k < 1 for k in sw["max_iters"]):
        raise UsageError("max_iters entries must be >= 1")
    try:
        schemes = [solvers.Scheme(s) for s in sw["schemes"]]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    spec = cfg.lasso_spec()
    if not problem.reconstructibility_check(spec.n, spec.m, spec.s) and not cfg.force:
        raise problem.ReconstructibilityError(
            f"reconstructibility check failed: m={spec.m} is too small for n={spec.n},"
            f" s={spec.s} (pass --force to override)")
    table = analysis.power_error_sweep(spec, schemes, sw["max_iters"], cfg.energy_model(),
                                       int(sw["n_experiments"]), sw["workers"], cfg.force)
    path = Path(args.out) if args.out else _out(cfg, "sweep.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table.to_csv())
    if table.unconverged:
        log.warning("reference solutions not converged for seeds %s", table.unconverged)
    if args.emit_gnuplot:
        path.with_suffix(".gp").write_text(GNUPLOT.format(csv=path.name))
    print(path)
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = build_config(args)
    prob, _ = cfg.load_problem()
    ref = _reference(prob)
    sc = cfg.solver_config(record_trace=True, reference=(ref.x, ref.z))
    start = {}
    if args.start == "kkt":
        start = {"x0": ref.x, "z0": ref.z, "v0": ref.v}
    tr = solvers.run(prob, sc, **start)
    rep = analysis.theorem1_bound(tr, prob, ref.x, ref.z, ref.f)
    _out(cfg, "bound.csv").write_text(rep.to_csv())
    ok = rep.holds(args.tol)
    print(f"min slack {rep.min_slack:.3e} ({'holds' if ok else 'VIOLATED'})")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_stability(args) -> int:
    cfg = build_config(args)
    prob, _ = cfg.load_problem()
    cert = stability.certify(prob, mu=args.mu, phi_samples=args.samples,
                             domain_radius=args.radius, T_end=args.t_end, dt=args.dt,
                             seed=args.sample_seed)
    _out(cfg, "stability.json").write_text(cert.to_json(args.include_matrices) + "\n")
    print(f"verdict: {cert.verdict}")
    for r in cert.reasons:
        print(f"  - {r}")
    # invariant: a certified system must satisfy its own envelope, and any
    # returned KYP solution must solve its equation
    bad = (cert.verdict == "certified" and cert.envelope_ok is False) or (
        cert.kyp_residual is not None and cert.kyp_residual > 1e-9)
    return EXIT_RUNTIME if bad else EXIT_OK


# -- parser -----------------------------------------------------------------------

def _problem_flags(p):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", help="serialized problem JSON (instead of generating)")
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--s", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--gamma", type=float)
    g.add_argument("--noise", type=float, help="measurement noise sigma")
    g.add_argument("--lam", type=float)
    g.add_argument("--lambda-z", type=float, dest="lambda_z")
    g.add_argument("--lambda-x", type=float, dest="lambda_x")
    g.add_argument("--force", action="store_true", help="skip the reconstructibility check")


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--scheme", choices=[s.value for s in solvers.Scheme])
    g.add_argument("--max-iter", type=int, dest="max_iter")
    g.add_argument("--arith", help="float64 or a Q format such as q16.8")
    g.add_argument("--overflow", choices=["wrap", "saturate"])
    g.add_argument("--quantize", choices=["truncate", "round_even"])
    g.add_argument("--eps0", type=float, help="enable injected proximal errors with this budget")
    g.add_argument("--error-kind", default="stochastic", dest="error_kind",
                   choices=["deterministic", "stochastic"])
    g.add_argument("--schedule", default="constant", choices=list(prox.SCHEDULES))
    g.add_argument("--error-seed", type=int, default=0, dest="error_seed")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out-dir", dest="out_dir")
        return sp

    g = common(sub.add_parser("generate", help="write a synthetic LASSO problem"))
    _problem_flags(g)
    g.add_argument("--out", help="output path (default OUT_DIR/problem.json)")
    g.set_defaults(func=cmd_generate)

    s = common(sub.add_parser("solve", help="run one solver; writes trace.csv and summary.json"))
    _problem_flags(s)
    _solver_flags(s)
    s.set_defaults(func=cmd_solve)

    w = common(sub.add_parser("sweep", help="power/error sweep over instances and budgets"))
    _problem_flags(w)
    w.add_argument("--max-iters", dest="max_iters", help="comma-separated budgets")
    w.add_argument("--schemes", help="comma-separated schemes")
    w.add_argument("--n-experiments", type=int, dest="n_experiments")
    w.add_argument("--workers", type=int)
    w.add_argument("--watts-admm", type=float, dest="watts_admm")
    w.add_argument("--watts-dfgpgd", type=float, dest="watts_dfgpgd")
    w.add_argument("--out", help="CSV path (default OUT_DIR/sweep.csv)")
    w.add_argument("--emit-gnuplot", action="store_true", dest="emit_gnuplot")
    w.set_defaults(func=cmd_sweep)

    b = common(sub.add_parser("bound", help="evaluate the running-average bound"))
    _problem_flags(b)
    _solver_flags(b)
    b.add_argument("--start", choices=["zero", "kkt"], default="zero")
    b.add_argument("--tol", type=float, default=1e-8)
    b.set_defaults(func=cmd_bound)

    t = common(sub.add_parser("stability", help="absolute-stability certificate as JSON"))
    _problem_flags(t)
    t.add_argument("--mu", type=float, default=0.1, help="l1 smoothing parameter")
    t.add_argument("--samples", type=int, default=10_000)
    t.add_argument("--radius", type=float, default=1.0)
    t.add_argument("--t-end", type=float, default=10.0, dest="t_end")
    t.add_argument("--dt", type=float, default=1e-2)
    t.add_argument("--sample-seed", type=int, default=0, dest="sample_seed")
    t.add_argument("--include-matrices", action="store_true", dest="include_matrices")
    t.set_defaults(func=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, problem.ReconstructibilityError) as exc:
        print(f"splitkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("failure", exc_info=True)
        print(f"splitkit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
