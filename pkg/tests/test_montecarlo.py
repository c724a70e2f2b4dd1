import numpy as np
import pytest

from ouportfolio import (DimensionMismatch, MissingPhi, ModelParams, PhiEvaluator,
                         Policy, RK3_KUTTA, mean_utility, numerical_policy,
                         path_utilities, policy_library, simulate_paths,
                         solve_coefficients, solve_riccati, validate)


@pytest.fixture(scope="module")
def commodity_sim(commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=50, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    return p, c, PhiEvaluator(path, p, c)


def _tiny_noise_1d():
    p = ModelParams(r=0.3, gamma=0.5, rho0=0.0, rho=[0.0], varrho=[[0.0]],
                    alpha=[0.5], mu=[2.0], sigma=[[1e-8]], T=1.0)
    return p, validate(p)


def test_deterministic_limit_half_consumption():
    # with vanishing volatility and C = X/2: dX = (r - 1/2) X dt
    p, c = _tiny_noise_1d()
    pol = Policy(name="half", rule=lambda t, x, s, rng: (np.zeros((x.size, 1)), 0.5 * x))
    errs = []
    for n_steps in (256, 512):
        ens = simulate_paths(p, c, pol, n_paths=3, n_steps=n_steps, seed=1,
                             x0=10.0, s0=[2.0])
        exact = 10.0 * np.exp((p.r - 0.5) * p.T)
        errs.append(abs(ens.X[0, -1] - exact))
    assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.3)   # first order


def test_zero_policy_grows_at_riskfree_rate():
    p, c = _tiny_noise_1d()
    pol = Policy(name="none", rule=lambda t, x, s, rng: (np.zeros((x.size, 1)),
                                                         np.zeros(x.size)))
    ens = simulate_paths(p, c, pol, n_paths=5, n_steps=400, seed=3, x0=4.0, s0=[2.0])
    # no noise enters wealth: every path is the same compounded sequence
    assert np.ptp(ens.X[:, -1]) == 0.0
    h = p.T / 400
    assert ens.X[0, -1] == pytest.approx(4.0 * (1 + p.r * h) ** 400, rel=1e-12)
    assert ens.X[0, -1] == pytest.approx(4.0 * np.exp(p.r * p.T), rel=1e-3)


def test_common_random_numbers_and_reproducibility(commodity_sim):
    p, c, ev = commodity_sim
    lib = {pol.name: pol for pol in policy_library(p, ev)}
    a = simulate_paths(p, c, lib["Riskless"], 40, 10, seed=11, x0=25.0,
                       s0=[2.0, 2.0], substeps=2)
    b = simulate_paths(p, c, lib["No Bonds"], 40, 10, seed=11, x0=25.0,
                       s0=[2.0, 2.0], substeps=2)
    assert np.array_equal(a.S, b.S)            # paired noise across policies
    a2 = simulate_paths(p, c, lib["Riskless"], 40, 10, seed=11, x0=25.0,
                        s0=[2.0, 2.0], substeps=2)
    assert np.array_equal(a.X, a2.X)
    assert np.array_equal(a.psi, a2.psi)
    assert a.mean_utility == a2.mean_utility


def test_psi_positive_and_starts_at_one(commodity_sim):
    p, c, ev = commodity_sim
    pol = policy_library(p, ev)[0]
    ens = simulate_paths(p, c, pol, 20, 10, seed=5, x0=25.0, s0=[2.0, 2.0])
    assert np.all(ens.psi[:, 0] == 1.0)
    assert np.all(ens.psi > 0.0)


def test_budget_identity(commodity_sim):
    p, c, ev = commodity_sim
    pol = policy_library(p, ev)[3]
    ens = simulate_paths(p, c, pol, 10, 8, seed=2, x0=25.0, s0=[2.0, 2.0],
                         substeps=2)
    nodes = ens.X[:, ::2][:, :-1]
    assert np.array_equal(ens.pi0, nodes - ens.pi.sum(axis=2))


def test_running_utility_vanishes_without_consumption(commodity_sim):
    p, c, ev = commodity_sim
    lib = {pol.name: pol for pol in policy_library(p, ev)}
    ens = simulate_paths(p, c, lib["No Consumption"], 30, 10, seed=8, x0=25.0,
                         s0=[2.0, 2.0])
    direct = ens.psi[:, -1] ** (1 - p.gamma) * ens.X[:, -1] ** p.gamma / p.gamma
    assert np.allclose(path_utilities(ens, p), direct, atol=0.0)


def test_standard_error_scales_with_paths(commodity_sim):
    p, c, ev = commodity_sim
    pol = {pol.name: pol for pol in policy_library(p, ev)}["No Bonds"]
    se = {}
    for m in (500, 2000):
        ens = simulate_paths(p, c, pol, m, 10, seed=21, x0=25.0, s0=[2.0, 2.0])
        se[m] = ens.std_error
    ratio = se[2000] / se[500]
    assert ratio == pytest.approx(0.5, abs=0.125)     # 1/sqrt(M) law


def test_policy_library_rows(commodity_sim):
    p, c, ev = commodity_sim
    lib = {pol.name: pol for pol in policy_library(p, ev)}
    assert len(lib) == 11
    x = np.array([10.0])
    s = np.array([[2.0, 2.0]])
    pi, cons = lib["Riskless"].rule(0.0, x, s, None)
    assert np.array_equal(pi[0], [0.0, 0.0]) and cons[0] == 5.0
    pi, cons = lib["Balanced Leverage"].rule(0.0, np.array([4.0]), s, None)
    assert np.array_equal(pi[0], [4.0, -2.0]) and cons[0] == 2.0
    pi, cons = lib["Extreme Leverage"].rule(0.0, x, s, None)
    assert np.array_equal(pi[0], [-80.0, 100.0]) and cons[0] == 2.5
    pi, cons = lib["Our Numerical Policy"].rule(p.T, x, s, None)
    assert cons[0] == 10.0                       # C = X at the horizon


def test_policy_library_guards(commodity_sim, flat_1d):
    p, c, ev = commodity_sim
    with pytest.raises(MissingPhi):
        policy_library(p, phi=None, include_numerical=True)
    assert len(policy_library(p, phi=None)) == 10
    p1, _ = flat_1d
    with pytest.raises(DimensionMismatch):
        policy_library(p1)
    with pytest.raises(MissingPhi):
        numerical_policy(None)
    with pytest.raises(ValueError):
        policy_library(p, ev, random_redraw="sometimes")


def test_random_policy_redraw_modes(commodity_2d):
    p, c = commodity_2d
    for mode, should_vary in (("step", True), ("path", False)):
        pol = {q.name: q for q in policy_library(p, random_redraw=mode)}["Random"]
        rng = np.random.default_rng((3, 0x5EED))
        x = np.full(6, 10.0)
        s = np.full((6, 2), 2.0)
        pi1, _ = pol.rule(0.0, x, s, rng)
        pi2, _ = pol.rule(0.1, x, s, rng)
        assert (not np.array_equal(pi1, pi2)) == should_vary


def test_absorption_floors_wealth(commodity_2d):
    p, c = commodity_2d
    wild = Policy(name="wild", rule=lambda t, x, s, rng: (
        np.stack([1e4 * x, -1e4 * x], axis=1), np.zeros(x.size)))
    ens = simulate_paths(p, c, wild, 200, 25, seed=4, x0=25.0, s0=[2.0, 2.0])
    assert ens.absorbed_count > 0
    dead = ens.absorbed
    assert np.all(ens.X[dead, -1] == 0.0)
    assert np.all(ens.X >= 0.0)


def test_negative_consumption_rejected(commodity_2d):
    p, c = commodity_2d
    bad = Policy(name="bad", rule=lambda t, x, s, rng: (np.zeros((x.size, 2)),
                                                        -np.ones(x.size)))
    with pytest.raises(ValueError, match="negative consumption"):
        simulate_paths(p, c, bad, 5, 4, seed=0, x0=25.0, s0=[2.0, 2.0])


def test_exact_ou_stepping_matches_moments(commodity_2d):
    # exact transition sampling reproduces the stationary-drift mean
    p, c = commodity_2d
    pol = Policy(name="none", rule=lambda t, x, s, rng: (np.zeros((x.size, 2)),
                                                         np.zeros(x.size)))
    ens = simulate_paths(p, c, pol, 4000, 10, seed=9, x0=25.0, s0=[2.0, 2.0],
                         exact_ou=True)
    from ouportfolio import ou_moments
    mom = ou_moments(c, 0.0, np.array([2.0, 2.0]), p.T)
    got = ens.S[:, -1].mean(axis=0)
    se = ens.S[:, -1].std(axis=0) / np.sqrt(4000)
    assert np.all(np.abs(got - mom.eta) <= 4 * se)


def test_candidate_value_consistent_with_simulation(commodity_sim):
    # the analytic candidate should sit above every alternative's realized
    # objective and agree with the feedback policy's own estimate
    p, c, ev = commodity_sim
    v = ev.value(0.0, 25.0, np.array([2.0, 2.0]), 1.0)
    assert np.isfinite(v) and v > 0
    lib = {pol.name: pol for pol in policy_library(p, ev)}
    for name in ("Riskless", "Balanced Leverage"):
        ens = simulate_paths(p, c, lib[name], 500, 50, seed=5, x0=25.0,
                             s0=[2.0, 2.0], substeps=4)
        assert v > ens.mean_utility
    ours = simulate_paths(p, c, lib["Our Numerical Policy"], 500, 50, seed=5,
                          x0=25.0, s0=[2.0, 2.0], substeps=4)
    assert abs(v - ours.mean_utility) <= 4 * ours.std_error + 0.05


def test_fifty_path_shapes(commodity_sim):
    p, c, ev = commodity_sim
    pol = numerical_policy(ev)
    ens = simulate_paths(p, c, pol, 50, 50, seed=12, x0=25.0, s0=[2.0, 2.0],
                         substeps=4)
    assert ens.S.shape == (50, 201, 2)
    assert ens.pi.shape == (50, 50, 2)
    assert np.all(np.isfinite(ens.S)) and np.all(np.isfinite(ens.X))
    assert np.all(ens.X > 0)                    # plottable on a log scale
    est, se = mean_utility(ens, p)
    assert np.isfinite(est) and np.isfinite(se)
