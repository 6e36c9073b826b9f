import numpy as np
import pytest

from oracles import circle_min_l1, grid_sup_pr1_scalar
from resest.analysis import (
    NOT_APPLICABLE,
    AnalysisError,
    beta_sigma,
    epsilon_sweep,
    estimate_D,
    estimate_pr,
    estimate_pr_table,
    evaluate_H,
    h_func,
    max_tolerable_outliers,
    q_func,
    refine_D,
    resilience_report,
    split_by_epsilon,
    theorem_bound,
    top_r_sums,
)
from resest.model import NoiseRealization, ScenarioConfig, SystemModel, generate_scenario, reference_system

SCALAR = SystemModel([[1.0]], [[1.0]], 2)
SMALL = dict(samples=2000, restarts=10, steps=200)


def test_H_examples():
    assert evaluate_H(SCALAR, [[0.0, 0.0]], 1.0) == 0.0
    assert evaluate_H(SCALAR, [[1.0, 1.0]], 2.0) == 2.0
    assert evaluate_H(SCALAR, [[0.0, 2.0]], 1.0) == 0.5 * 4 + 2


def test_H_positive_for_observable(rng):
    m = reference_system(15)
    for _ in range(100):
        assert evaluate_H(m, rng.standard_normal((2, 15)), 0.2) > 0


@pytest.mark.parametrize("a,q,h", [(0.0, 0.0, 0.0), (0.5, 0.25, np.sqrt(0.5)), (0.25, 0.0625, 0.5), (3.0, 3.0, 3.0), (4.0, 4.0, 4.0)])
def test_q_h_values(a, q, h):
    assert q_func(a) == q
    assert h_func(a) == pytest.approx(h, rel=1e-15)


def test_q_h_reject_negative():
    with pytest.raises(ValueError):
        q_func(-1.0)
    with pytest.raises(ValueError):
        h_func(-1e-9)


def test_top_r_sums():
    out = top_r_sums(np.array([1.0, -5.0, 2.0]))
    np.testing.assert_array_equal(out, [0.0, 5.0, 7.0, 8.0])


def test_D_circle_oracle():
    # n=1, T=2, A=0, C=1, lam=0: H = |z0| + |z1|, so D = min over the unit circle
    m = SystemModel([[0.0]], [[1.0]], 2)
    expected = circle_min_l1()  # 1.0
    est = estimate_D(m, 0.0, **SMALL)
    assert est.value == pytest.approx(expected, abs=1e-6)
    assert not est.certified


def test_D_value_agrees_with_argmin_and_is_deterministic():
    m = reference_system(20)
    a = estimate_D(m, 0.2, seed=4, **SMALL)
    b = estimate_D(m, 0.2, seed=4, **SMALL)
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmin, b.argmin)
    assert evaluate_H(m, a.argmin, 0.2) == pytest.approx(a.value, rel=1e-12)
    assert np.linalg.norm(a.argmin) == pytest.approx(1.0, rel=1e-12)


def test_D_maxcol_norm():
    m = reference_system(10)
    est = estimate_D(m, 0.2, norm="maxcol", **SMALL)
    assert np.max(np.linalg.norm(est.argmin, axis=0)) == pytest.approx(1.0, rel=1e-12)
    assert est.value > 0


def test_D_rejects_unobservable():
    with pytest.raises(AnalysisError):
        estimate_D(SystemModel(np.eye(2), [[1.0, 0.0]], 4), 1.0)


def test_lemma1_at_sampled_scale(rng):
    m = reference_system(12)
    est = estimate_D(m, 0.2, **SMALL)
    fresh = rng.standard_normal((500, 2, 12)) * 10.0 ** rng.uniform(-2, 2, size=(500, 1, 1))
    refined, count = refine_D(m, 0.2, est.value, fresh)
    assert refined <= est.value
    for Z in fresh:
        assert evaluate_H(m, Z, 0.2) >= refined * q_func(np.linalg.norm(Z)) - 1e-12


def test_pr_zero_and_full():
    m = reference_system(6)
    assert estimate_pr(m, 0.2, 0) == 0.0
    tab = estimate_pr_table(m, 0.2, **SMALL).table
    assert tab[0] == 0.0
    assert tab[m.n_y * m.T] <= 1.0
    vals = [tab[r] for r in sorted(tab)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_pr_grid_oracle():
    expected = grid_sup_pr1_scalar(1.0)  # 0.99950...
    got = estimate_pr(SCALAR, 1.0, 1, **SMALL)
    assert abs(got - expected) <= 1e-2
    assert got <= 1.0


def test_pr_rejects_bad_r():
    with pytest.raises(AnalysisError):
        estimate_pr(SCALAR, 1.0, 3)


def test_pr_numerator_bound(rng):
    # the greedy r-term sum never exceeds H(Z)
    m = reference_system(10)
    for _ in range(200):
        Z = rng.standard_normal((2, 10)) * 10.0 ** rng.uniform(-3, 2)
        sums = top_r_sums(m.C @ Z)
        assert np.all(sums <= evaluate_H(m, Z, 0.2) * (1 + 1e-12))


def test_constrained_pr_table():
    m = reference_system(30)
    tab = estimate_pr_table(m, 0.2, r_max=5, constrained=True, **SMALL).table
    vals = [tab[r] for r in range(6)]
    assert vals[0] == 0.0 and all(b >= a for a, b in zip(vals, vals[1:])) and vals[-1] <= 1.0


def _noise(f, w=None):
    f = np.atleast_2d(np.asarray(f, float))
    T = f.shape[1]
    w = np.zeros((1, T - 1)) if w is None else np.atleast_2d(np.asarray(w, float))
    return NoiseRealization(w, f, np.zeros_like(f))


def test_split_examples():
    nz = _noise([[0.0, 3.0, -1.0, 0.0, 7.0]])
    big = split_by_epsilon(nz, 7.0)
    assert big.r == 0 and big.unbounded_set() == set()
    assert split_by_epsilon(nz, 0.0).r == 3
    assert split_by_epsilon(_noise(np.zeros((2, 4))), 2.5).r == 0
    s = split_by_epsilon(nz, 1.0)
    assert s.bounded_set() | s.unbounded_set() == {(0, t) for t in range(5)}
    assert s.bounded_set() & s.unbounded_set() == set()


def test_beta_examples():
    nz = _noise([[0.3, -100.0, 2.0]])
    assert beta_sigma(nz, split_by_epsilon(nz, 0.0), 1.0) == 0.0
    nz2 = _noise([[0.3, -0.2, 0.1]])
    sp = split_by_epsilon(nz2, 0.5)
    assert beta_sigma(nz2, sp, 1.0) == pytest.approx(0.6)
    assert beta_sigma(nz2, sp, 1.0) <= (~sp.unbounded).sum() * 0.5
    nz3 = _noise([[0.0, 5.0]], w=[[2.0]])
    assert beta_sigma(nz3, split_by_epsilon(nz3, 1.0), 1.0) == 4.0


def test_theorem_bound_examples():
    assert theorem_bound(3.0, 0.2, 0.0) == 0.0
    assert theorem_bound(1.0, 0.0, 2.0) == 4.0
    assert theorem_bound(1.0, 0.5, 2.0) is NOT_APPLICABLE
    with pytest.raises(ValueError):
        theorem_bound(0.0, 0.1, 1.0)


def test_max_tolerable_outliers():
    assert max_tolerable_outliers({0: 0.0}) == 0
    assert max_tolerable_outliers({0: 0.0, 1: 0.3, 2: 0.6}) == 1
    assert max_tolerable_outliers({0: 0.0, 1: 0.49, 2: 0.49}) == 2
    with pytest.raises(AnalysisError):
        max_tolerable_outliers({})


def test_sweep_noiseless_f():
    m = SystemModel([[0.5]], [[1.0]], 4)
    nz = NoiseRealization([[1.0, 0.0, 1.0]], np.zeros((1, 4)), np.zeros((1, 4)))
    res = epsilon_sweep(m, nz, 0.5, 1.0, {0: 0.0}, grid=[0.0, 0.1, 1.0])
    assert res.epsilon_star == 0.0
    assert res.bound == h_func(2 * 0.5 * 2.0 / 1.0)


def test_sweep_single_point_and_not_applicable():
    m = SystemModel([[0.5]], [[1.0]], 3)
    nz = _noise([[0.0, 9.0, 0.0]], w=[[0.0, 0.0]])
    res = epsilon_sweep(m, nz, 1.0, 1.0, {0: 0.0, 1: 0.7}, grid=[0.0])
    assert res.epsilon_star is None and res.bound is None
    res = epsilon_sweep(m, nz, 1.0, 1.0, {0: 0.0, 1: 0.2}, grid=[0.0])
    assert res.epsilon_star == 0.0 and res.bound == 0.0


def test_sweep_bound_ignores_spike_magnitude():
    m = SystemModel([[0.5]], [[1.0]], 6)
    v = np.array([[0.01, -0.02, 0.015, 0.0, 0.01, -0.01]])
    spikes = np.zeros((1, 6))
    spikes[0, 2] = 1.0
    table = {0: 0.0, 1: 0.3}
    bounds = []
    for mag in (1e2, 1e4, 1e6):
        nz = NoiseRealization(np.zeros((1, 5)), v, spikes * mag, [(0, 2)])
        res = epsilon_sweep(m, nz, 1.0, 0.5, table, grid=[0.0, 0.02, 0.03])
        assert res.epsilon_star == 0.03 or res.epsilon_star == 0.02
        bounds.append(res.bound)
    assert bounds[0] == bounds[1] == bounds[2]


def test_sweep_ties_prefer_smaller_epsilon():
    m = SystemModel([[0.5]], [[1.0]], 3)
    nz = _noise([[0.0, 0.0, 0.0]])
    res = epsilon_sweep(m, nz, 1.0, 1.0, {0: 0.0}, grid=[0.0, 1.0, 2.0])
    assert res.epsilon_star == 0.0


def test_sweep_rejects_unsorted_grid():
    m = SystemModel([[0.5]], [[1.0]], 3)
    with pytest.raises(ValueError):
        epsilon_sweep(m, _noise([[0.0, 1.0, 0.0]]), 1.0, 1.0, {0: 0.0}, grid=[1.0, 0.0])


def test_report_flags_uncertified():
    m = reference_system(20)
    nz = generate_scenario(m, ScenarioConfig(seed=0, attack_count=2))
    rep = resilience_report(m, nz, 0.2, samples=1000, restarts=5, steps=100)
    assert not any(rep.certified.values())
    assert rep.pr_table[0] == 0.0
    assert rep.bound is None or rep.bound >= 0
    d = rep.to_dict()
    assert d["certified"]["bound"] is False
