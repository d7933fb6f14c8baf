import math

import numpy as np
import pytest

from splitkit import problem
from splitkit.problem import (CompositeProblem, LassoSpec, ReconstructibilityError,
                              generate_lasso, reconstructibility_check)


def test_reconstructibility_examples():
    assert reconstructibility_check(700, 270, 20)
    assert 2 * 20 * math.log(35) + 28 + 1 == pytest.approx(171.2, abs=0.05)
    assert not reconstructibility_check(700, 270, 100)
    assert 200 * math.log(7) + 141 == pytest.approx(530.2, abs=0.05)
    for s in (1, 5, 20):
        assert reconstructibility_check(s, math.ceil(7 * s / 5) + 2, s)
    with pytest.raises(ValueError):
        reconstructibility_check(5, 3, 6)


def test_small_spec_needs_force():
    # n=8, m=6, s=1: 2 ln 8 + 7/5 + 1 = 6.56 > 6, so the check refuses
    spec = LassoSpec(n=8, m=6, s=1, noise_sigma=0.0, seed=7)
    with pytest.raises(ReconstructibilityError):
        generate_lasso(spec)
    prob, x_true = generate_lasso(spec, force=True)
    np.testing.assert_array_equal(prob.b, prob.H @ x_true)


def test_reference_dimensions():
    prob, x_true = generate_lasso(LassoSpec(n=700, m=270, s=20, seed=1))
    assert prob.H.shape == (270, 700)
    assert prob.A.shape == (700, 700)
    assert np.count_nonzero(x_true) == 20
    assert set(np.abs(x_true[x_true != 0])) == {1.0}


def test_generation_is_deterministic():
    a, xa = generate_lasso(LassoSpec(n=30, m=20, s=3, seed=11))
    b, xb = generate_lasso(LassoSpec(n=30, m=20, s=3, seed=11))
    for k in ("H", "b", "A", "B", "c"):
        assert np.array_equal(getattr(a, k), getattr(b, k))
    assert np.array_equal(xa, xb)
    assert a.gamma == b.gamma


def test_scaling_and_defaults():
    prob, _ = generate_lasso(LassoSpec(n=400, m=300, s=3, seed=2))
    assert np.var(prob.H) * prob.m == pytest.approx(1.0, rel=0.02)
    assert prob.gamma == pytest.approx(0.1 * np.abs(prob.H.T @ prob.b).max())
    assert prob.lambda_x == pytest.approx(1.05 * np.linalg.norm(prob.H, 2) ** 2, rel=1e-9)
    assert prob.lam == 1.0 and prob.lambda_z == 1.0
    np.testing.assert_array_equal(prob.L, np.eye(prob.p))


def test_consensus_split(rng):
    prob, _ = generate_lasso(LassoSpec(n=10, m=9, s=1, seed=0))
    x = rng.standard_normal(10)
    assert problem.constraint_residual(prob, x, x) == 0.0
    assert problem.constraint_residual(prob, x, x + 1e-3) > 0


def test_objective_examples(rng):
    full, x_true = generate_lasso(LassoSpec(n=10, m=9, s=1, seed=0, half_quadratic=False))
    zero = np.zeros(10)
    assert problem.objective(full, zero, zero) == pytest.approx(float(full.b @ full.b))
    assert problem.constraint_residual(full, zero, zero) == pytest.approx(np.linalg.norm(full.c))
    assert problem.objective(full, x_true, x_true) == pytest.approx(full.gamma * np.abs(x_true).sum())
    half = full.with_params(half_quadratic=True)
    x, z = rng.standard_normal(10), rng.standard_normal(10)
    r = half.H @ x - half.b  # independent evaluation
    assert problem.objective(half, x, z) == pytest.approx(0.5 * r @ r + half.gamma * np.abs(z).sum())
    assert problem.objective(full, x, z) == pytest.approx(r @ r + full.gamma * np.abs(z).sum())
    with pytest.raises(ValueError):
        problem.objective(half, x[:3], z)


def test_gradient_convention(rng):
    for half in (True, False):
        prob, _ = generate_lasso(LassoSpec(n=6, m=5, s=1, seed=1, half_quadratic=half), force=True)
        x, d = rng.standard_normal(6), rng.standard_normal(6)
        h = 1e-6
        fd = (prob.g(x + h * d) - prob.g(x - h * d)) / (2 * h)
        assert fd == pytest.approx(d @ (prob.hess @ x - prob.lin), rel=1e-6)


def test_invalid_problems():
    with pytest.raises(ValueError):
        CompositeProblem(H=np.eye(2), b=np.zeros(3), A=np.eye(2), B=-np.eye(2), c=np.zeros(2),
                         gamma=0.1)
    with pytest.raises(ValueError):
        CompositeProblem(H=np.eye(2), b=np.zeros(2), A=np.eye(2), B=-np.eye(2), c=np.zeros(2),
                         gamma=-1.0)
    with pytest.raises(ValueError):
        LassoSpec(n=3, m=2, s=0)


def test_serialization_roundtrip(tmp_path):
    prob, x_true = generate_lasso(LassoSpec(n=12, m=10, s=2, seed=5), force=True)
    path = tmp_path / "p.json"
    problem.save_problem(prob, path, x_true)
    back, xt = problem.load_problem(path)
    for k in ("H", "b", "A", "B", "c", "L"):
        assert np.array_equal(getattr(prob, k), getattr(back, k))
    assert back.gamma == prob.gamma and back.lambda_x == prob.lambda_x
    assert np.array_equal(xt, x_true)
    path2 = tmp_path / "q.json"
    problem.save_problem(back, path2, xt)
    assert path.read_bytes() == path2.read_bytes()
