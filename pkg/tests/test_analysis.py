import math

import numpy as np
import pytest

from conftest import random_lasso
from splitkit import analysis, solvers
from splitkit.analysis import EnergyModel, reference_solution, relative_error
from splitkit.problem import CompositeProblem, LassoSpec, generate_lasso, objective
from splitkit.prox import ErrorKind, ErrorModel
from splitkit.solvers import Scheme, SolverConfig
from test_solvers import kkt_problem


def _coordinate_descent(H, b, gamma, sweeps=20000):
    """Independent lasso oracle: cyclic exact minimization per coordinate."""
    x = np.zeros(H.shape[1])
    col_sq = (H * H).sum(axis=0)
    for _ in range(sweeps):
        old = x.copy()
        for j in range(x.size):
            r = b - H @ x + H[:, j] * x[j]
            rho = H[:, j] @ r
            x[j] = np.sign(rho) * max(abs(rho) - gamma, 0.0) / col_sq[j]
        if np.max(np.abs(x - old)) < 1e-15:
            break
    return x


def test_reference_least_squares_limit():
    rng = np.random.default_rng(1)
    H = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    b = rng.standard_normal(4)
    prob = CompositeProblem(H=H, b=b, A=np.eye(4), B=-np.eye(4), c=np.zeros(4), gamma=0.0)
    ref = reference_solution(prob)
    assert ref.converged
    np.testing.assert_allclose(ref.x, np.linalg.solve(H, b), atol=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_reference_matches_coordinate_descent(seed):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((5, 3))
    b = rng.standard_normal(5)
    gamma = 0.3 * np.abs(H.T @ b).max()
    prob = CompositeProblem(H=H, b=b, A=np.eye(3), B=-np.eye(3), c=np.zeros(3), gamma=gamma)
    x_cd = _coordinate_descent(H, b, gamma)
    x_star, z_star, f_star = reference_solution(prob)
    np.testing.assert_allclose(z_star, x_cd, atol=1e-6)
    assert f_star == pytest.approx(objective(prob, x_cd, x_cd), abs=1e-6)


def test_reference_is_deterministic(small_lasso):
    prob, _ = small_lasso
    a, b = reference_solution(prob), reference_solution(prob)
    assert np.array_equal(a.x, b.x) and a.f == b.f and a.iterations == b.iterations


def test_reference_reports_nonconvergence(small_lasso):
    ref = reference_solution(small_lasso[0], max_iter=3)
    assert not ref.converged and ref.iterations == 3


# -- bound -----------------------------------------------------------------------

def test_bound_from_kkt_start():
    prob, x_star, v_star = kkt_problem(n=5)
    tr = solvers.run(prob, SolverConfig(Scheme.DFGPGD, 30, record_trace=True),
                     x0=x_star, z0=x_star, v0=v_star)
    rep = analysis.theorem1_bound(tr, prob, x_star, x_star)
    assert np.max(np.abs(rep.lhs)) < 1e-12 and np.max(np.abs(rep.rhs)) < 1e-12
    assert rep.holds()


def _bound(seed, eps0, scheme=Scheme.DFGPGD, k=120):
    prob = random_lasso(seed, n=20, m=15, s=2)
    ref = reference_solution(prob)
    kind = ErrorKind.STOCHASTIC if eps0 else ErrorKind.NONE
    cfg = SolverConfig(scheme, k, error_x=ErrorModel(kind, eps0, seed=seed),
                       error_z=ErrorModel(kind, eps0, seed=seed), record_trace=True,
                       reference=(ref.x, ref.z))
    tr = solvers.run(prob, cfg)
    return tr, analysis.theorem1_bound(tr, prob, ref.x, ref.z, ref.f)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("eps0", [0.0, 1e-3])
def test_bound_holds_dfgpgd(seed, eps0):
    tr, rep = _bound(seed, eps0)
    assert rep.holds(1e-8), rep.min_slack
    # bookkeeping identity: error sums are the audited per-iteration values
    assert np.array_equal(rep.error_sum_g, np.cumsum(tr.column("eps_g")))
    assert np.array_equal(rep.error_sum_h, np.cumsum(tr.column("eps_h")))
    if eps0:
        assert rep.error_sum_g[-1] > 0 and tr.column("eps_g").max() <= eps0


def test_bound_holds_admm():
    _, rep = _bound(4, 0.0, Scheme.CLASSICAL_ADMM)
    assert rep.holds(1e-8)


def test_bound_needs_snapshots():
    prob = random_lasso(0)
    tr = solvers.run(prob, SolverConfig(Scheme.DFGPGD, 5))
    with pytest.raises(ValueError):
        analysis.theorem1_bound(tr, prob, np.zeros(12), np.zeros(12))


def test_bound_csv():
    _, rep = _bound(0, 0.0, k=10)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "# splitkit-schema v1" and lines[1].startswith("k,lhs,rhs,slack")
    assert len(lines) == 12


# -- metrics ---------------------------------------------------------------------

def test_relative_error_examples():
    assert relative_error(3.0, 3.0) == 0.0
    assert relative_error(3.0, 3.0, "text") == 0.0
    assert relative_error(4.0, 2.0) == pytest.approx(100.0)
    assert relative_error(4.0, 2.0, "text") == pytest.approx(50.0)
    assert relative_error(1.0, 2.0) == pytest.approx(50.0)
    with pytest.raises(ValueError):
        relative_error(0.0, 1.0, "text")
    with pytest.raises(ValueError):
        relative_error(1.0, 0.0)
    with pytest.raises(ValueError):
        relative_error(1.0, 1.0, "other")
    cap, txt = analysis.relative_errors([2.0, 4.0], 2.0)
    np.testing.assert_allclose(cap, [0.0, 100.0])
    np.testing.assert_allclose(txt, [0.0, 50.0])


def test_energy_model():
    em = EnergyModel()
    assert em.watts(Scheme.DFGPGD) < em.watts(Scheme.CLASSICAL_ADMM)
    assert em.energy(Scheme.DFGPGD, 10) == pytest.approx(3.8e-2)
    assert em.energy("admm", 300) == pytest.approx(300 * 8.8e-3)
    ks = np.arange(1, 50)
    np.testing.assert_allclose([em.energy("admm", k) for k in ks], ks * 8.8e-3)
    with pytest.raises(ValueError):
        EnergyModel(watts_per_iter_admm=0.0)


def test_iterations_to_target():
    assert analysis.iterations_to_target([5.0, 2.0, 0.5, 0.1], 1.0) == 3
    assert math.isinf(analysis.iterations_to_target([5.0, 2.0], 1.0))
    dip = [5.0, 0.5, 3.0, 0.8, 0.2]
    assert analysis.iterations_to_target(dip, 1.0) == 2
    assert analysis.iterations_to_target(dip, 1.0, settled=True) == 4
    assert analysis.iterations_to_target([0.1, 0.2], 1.0, settled=True) == 1
    assert math.isinf(analysis.iterations_to_target([0.1, 2.0], 1.0, settled=True))


# -- sweep -----------------------------------------------------------------------

SPEC = LassoSpec(n=30, m=20, s=2, seed=5)


@pytest.fixture(scope="module")
def small_sweep():
    return analysis.power_error_sweep(SPEC, max_iters=(10, 40, 120), n_experiments=4)


def test_sweep_rows(small_sweep):
    assert len(small_sweep.rows) == 4 * 3 * 2
    assert [r["seed"] for r in small_sweep.rows[:6]] == [5] * 6
    lines = small_sweep.to_csv().splitlines()
    assert lines[1] == ",".join(analysis.SWEEP_COLUMNS)
    for k in (10, 40, 120):
        for a, d in zip(small_sweep.select("admm", k), small_sweep.select("dfgpgd", k)):
            assert d["energy_w"] < a["energy_w"]


def test_sweep_values_recompute(small_sweep):
    """Recompute one row from scratch, spreadsheet-style."""
    prob, _ = generate_lasso(LassoSpec(n=30, m=20, s=2, seed=7))
    f_star = reference_solution(prob).f
    tr = solvers.run(prob, SolverConfig(Scheme.DFGPGD, 40))
    f = tr.rows[-1]["objective"]
    row = [r for r in small_sweep.select("dfgpgd", 40) if r["seed"] == 7][0]
    assert row["rel_err_caption"] == pytest.approx(100 * abs(f - f_star) / f_star, rel=1e-12)
    assert row["rel_err_text"] == pytest.approx(100 * (f - f_star) / f, rel=1e-12)


def test_sweep_error_improves_with_budget(small_sweep):
    for scheme in ("admm", "dfgpgd"):
        lo = np.median([r["rel_err_caption"] for r in small_sweep.select(scheme, 10)])
        hi = np.median([r["rel_err_caption"] for r in small_sweep.select(scheme, 120)])
        assert hi < lo


def test_sweep_parallel_matches_serial():
    a = analysis.power_error_sweep(SPEC, max_iters=(10,), n_experiments=3, workers=1)
    b = analysis.power_error_sweep(SPEC, max_iters=(10,), n_experiments=3, workers=2)
    assert a.to_csv() == b.to_csv()


def test_sweep_rejects_bad_arguments():
    with pytest.raises(ValueError):
        analysis.power_error_sweep(SPEC, n_experiments=0)
    with pytest.raises(ValueError):
        analysis.power_error_sweep(SPEC, max_iters=(0, 10), n_experiments=1)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SPLITKIT_THREADS", "1")
    assert analysis.worker_count(8) == 1
    monkeypatch.delenv("SPLITKIT_THREADS")
    assert 1 <= analysis.worker_count() <= 64
