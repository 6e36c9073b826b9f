import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_min_scalar_F
from resest.estimator import (
    EstimatorConfig,
    NotObservableError,
    certify,
    evaluate_F,
    soft_threshold,
    solve,
)
from resest.model import (
    NoiseRealization,
    ScenarioConfig,
    SystemModel,
    generate_scenario,
    reference_system,
    simulate,
)

SCALAR = SystemModel([[1.0]], [[1.0]], 2)


def test_F_examples():
    assert evaluate_F(SCALAR, [[0.0, 1.0]], [[0.0, 0.0]], 1.0) == 1.0
    assert evaluate_F(SCALAR, [[0.0, 1.0]], [[0.0, 1.0]], 2.0) == 2.0
    m = reference_system(20)
    X, Y = simulate(m, NoiseRealization.zeros(m), [1.0, -2.0])
    assert evaluate_F(m, Y, X, 0.2) == pytest.approx(0.0, abs=1e-20)


def test_F_dimension_mismatch():
    with pytest.raises(ValueError, match="Z"):
        evaluate_F(SCALAR, [[0.0, 1.0]], [[0.0, 0.0, 0.0]], 1.0)


@pytest.mark.parametrize("x,k,expected", [(3.0, 1.0, 2.0), (-0.5, 1.0, 0.0), (-4.0, 1.5, -2.5), (0.7, 0.0, 0.7)])
def test_soft_threshold(x, k, expected):
    assert soft_threshold(x, k) == expected


def test_soft_threshold_negative_kappa():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(0, 1e3))
def test_soft_threshold_is_prox_of_abs(xs, kappa):
    x = np.array(xs)
    p = soft_threshold(x, kappa)
    assert np.all(np.abs(p) <= np.abs(x))
    # prox optimality: x - p lies in kappa * subdifferential of |.| at p
    d = x - p
    assert np.all(np.abs(d) <= kappa * (1 + 1e-12) + 1e-9)
    nz = p != 0
    np.testing.assert_allclose(d[nz], kappa * np.sign(p[nz]), rtol=1e-9, atol=1e-6)


def test_F_convexity(rng):
    m = SystemModel(rng.standard_normal((3, 3)), rng.standard_normal((2, 3)), 12)
    Y = rng.standard_normal((2, 12)) * 3
    for _ in range(500):
        Z1, Z2 = rng.standard_normal((2, 3, 12))
        th = rng.uniform()
        lhs = evaluate_F(m, Y, th * Z1 + (1 - th) * Z2, 0.7)
        rhs = th * evaluate_F(m, Y, Z1, 0.7) + (1 - th) * evaluate_F(m, Y, Z2, 0.7)
        assert lhs <= rhs + 1e-12 * (1 + abs(rhs))


def test_solve_noiseless_recovers_truth():
    m = reference_system(40)
    X, Y = simulate(m, NoiseRealization.zeros(m), [2.0, -1.0])
    res = solve(m, Y)
    assert res.objective <= 1e-9
    np.testing.assert_allclose(res.estimate, X, atol=1e-6)
    assert res.certificate.satisfied


def test_solve_scalar_matches_grid_oracle():
    # frozen from oracles.grid_min_scalar_F(1, 1, 1.0, (0, 1), -1, 2): minimum 0.75 on a segment
    res = solve(SCALAR, [[0.0, 1.0]], EstimatorConfig(lam=1.0))
    assert abs(res.objective - 0.75) <= 1e-3
    assert res.certificate.satisfied


def test_certificate_at_grid_minimizer():
    best, arg = grid_min_scalar_F(1.0, 1.0, 1.0, (0.0, 1.0), -1.0, 2.0)
    cert = certify(SCALAR, [[0.0, 1.0]], arg[None, :], 1.0, 1e-2)
    assert cert.subgradient_residual <= 1e-2


@pytest.mark.parametrize("seed", range(6))
def test_oracle_equivalence_small_instances(seed):
    r = np.random.default_rng(seed)
    a, c, lam = r.uniform(-1.5, 1.5), r.choice([-1.0, 1.0]) * r.uniform(0.5, 1.5), r.uniform(0.2, 2.0)
    y = np.round(r.uniform(-1.5, 1.5, size=2), 3)
    m = SystemModel([[a]], [[c]], 2)
    res = solve(m, y[None, :], EstimatorConfig(lam=lam))
    best, _ = grid_min_scalar_F(a, c, lam, y, -3.0, 3.0)
    assert res.objective <= best + 1e-9
    assert best - res.objective <= 1e-3


def test_certificate_rejects_perturbed_truth():
    m = reference_system(30)
    X, Y = simulate(m, NoiseRealization.zeros(m), [1.0, 1.0])
    cert = certify(m, Y, X + 5.0, 0.2, 1e-6)
    assert not cert.satisfied


def test_non_observable_rejected():
    m = SystemModel(np.eye(2), [[1.0, 0.0]], 10)
    with pytest.raises(NotObservableError):
        solve(m, np.zeros((1, 10)))


def test_max_iter_reports_unsatisfied_certificate():
    m = reference_system(60)
    nz = generate_scenario(m, ScenarioConfig(seed=1))
    _, Y = simulate(m, nz, [1.0, 0.0])
    res = solve(m, Y, EstimatorConfig(max_iter=2, polish=False))
    assert not res.converged
    assert not res.certificate.satisfied


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("count", [0, 5, 20])
def test_minimizer_dominance_and_certificate(seed, count):
    m = reference_system(100)
    cfg = ScenarioConfig(seed=seed, attack_count=count)
    nz = generate_scenario(m, cfg)
    X, Y = simulate(m, nz, cfg.x0(m))
    res = solve(m, Y)
    assert res.objective <= evaluate_F(m, Y, X, 0.2) + 1e-6
    assert res.certificate.satisfied


def test_monotone_objective_trace():
    m = reference_system(80)
    cfg = ScenarioConfig(seed=5)
    nz = generate_scenario(m, cfg)
    _, Y = simulate(m, nz, cfg.x0(m))
    res = solve(m, Y, EstimatorConfig(verbose=True))
    objs = [row["objective"] for row in res.trace]
    assert all(np.isfinite(objs))
    assert res.objective <= objs[0]


def test_certified_solution_is_local_minimum(rng):
    m = reference_system(25)
    cfg = ScenarioConfig(seed=3, attack_count=4)
    nz = generate_scenario(m, cfg)
    _, Y = simulate(m, nz, cfg.x0(m))
    res = solve(m, Y)
    assert res.certificate.satisfied
    step = 10 * EstimatorConfig().abs_tol
    for k in range(m.n):
        for t in range(m.T):
            for sgn in (-1, 1):
                Z = res.estimate.copy()
                Z[k, t] += sgn * step
                assert evaluate_F(m, Y, Z, 0.2) >= res.objective - 1e-9


def test_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(11)
    m = SystemModel(rng.standard_normal((3, 3)) * 0.6, rng.standard_normal((2, 3)), 30)
    nz = generate_scenario(m, ScenarioConfig(seed=2, attack_count=6, initial_state=(1.0, 0.0, -1.0)))
    _, Y = simulate(m, nz, [1.0, 0.0, -1.0])
    res = solve(m, Y, EstimatorConfig(lam=0.5))
    Z = cp.Variable((3, 30))
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(Z[:, 1:] - m.A @ Z[:, :-1]) + cp.sum(cp.abs(Y - m.C @ Z))))
    prob.solve()
    assert res.objective <= prob.value + 1e-6
    assert prob.value - res.objective <= 1e-4 * max(1.0, abs(prob.value))
