import numpy as np
import pytest

from ouportfolio import (CoefficientPath, DecoupledParams, NonPositiveWealth,
                         PhiEvaluator, PhiOverflow, PhiUnderflow, RK3_KUTTA,
                         benchmark_table, pde_residual_1d, phi_reference_1d,
                         solve_coefficients, solve_riccati, RK2_MIDPOINT)


@pytest.fixture(scope="module")
def commodity_eval(commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=50, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    return p, c, PhiEvaluator(path, p, c)


def _zero_path(p, K=10):
    return CoefficientPath(T=p.T, h=p.T / K, K=K,
                           g_values=np.zeros((K + 1, p.n, p.n)), g_half=None,
                           f_values=np.zeros((K + 1, p.n)),
                           f0_values=np.zeros(K + 1), scheme="erow3-rk3")


def test_terminal_values(commodity_eval):
    p, c, ev = commodity_eval
    S = np.array([1.7, 2.4])
    assert ev.phi1(p.T, S) == 1.0
    assert ev.phi2(p.T, S) == 0.0
    assert np.allclose(ev.grad_phi(p.T, S), 0.0, atol=0.0)


def test_phi1_at_origin_is_exp_f0(commodity_eval):
    p, c, ev = commodity_eval
    t = 0.1
    _, _, f0 = ev.coeffs_at(t)
    assert ev.phi1(t, np.zeros(2)) == pytest.approx(np.exp(f0), rel=1e-14)


def test_phi_positive_on_grid(commodity_eval):
    p, c, ev = commodity_eval
    for t in np.linspace(0, p.T, 7):
        for s1 in np.linspace(1, 3, 5):
            for s2 in np.linspace(1, 3, 5):
                val = ev.phi(t, np.array([s1, s2]))
                assert val > 0
                assert val >= ev.phi2(t, np.array([s1, s2]))


def test_phi1_matches_quadrature_benchmark(flat_1d):
    p, c = flat_1d
    dp = DecoupledParams.from_model(p, c)
    grid = solve_riccati(p, c, scheme="erow3", K=100, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    ev = PhiEvaluator(path, p, c)
    surf = phi_reference_1d(dp, np.array([0.0, p.T]), np.array([3.0]))
    assert ev.phi(0.0, np.array([3.0])) == pytest.approx(surf[0, 0], abs=1e-7)


def test_grad_matches_finite_differences(commodity_eval):
    p, c, ev = commodity_eval
    rng = np.random.default_rng(31)
    eps = 1e-6
    for _ in range(50):
        t = float(rng.uniform(0, p.T))
        S = rng.uniform(1.0, 3.0, size=2)
        grad = ev.grad_phi(t, S)
        fd = np.array([
            (ev.phi(t, S + eps * np.eye(2)[i]) - ev.phi(t, S - eps * np.eye(2)[i]))
            / (2 * eps) for i in range(2)])
        assert np.abs(grad - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


def test_value_terminal_and_scaling(commodity_eval):
    p, c, ev = commodity_eval
    S = np.array([2.0, 2.0])
    g = p.gamma
    x, psi = 25.0, 0.9
    assert ev.value(p.T, x, S, psi) == pytest.approx(psi ** (1 - g) * x**g / g,
                                                     rel=1e-14)
    v1 = ev.value(0.1, x, S, 1.0)
    v2 = ev.value(0.1, 4.0 * x, S, 1.0)
    assert v2 == pytest.approx(4.0**g * v1, rel=1e-13)
    with pytest.raises(NonPositiveWealth):
        ev.value(0.1, 0.0, S, 1.0)
    with pytest.raises(ValueError):
        ev.value(0.1, x, S, -1.0)


def test_policy_linearity_and_terminal_consumption(commodity_eval):
    p, c, ev = commodity_eval
    S = np.array([2.2, 1.9])
    pi1, c1 = ev.feedback_policy(0.07, 3.0, S)
    pi2, c2 = ev.feedback_policy(0.07, 6.0, S)      # doubling is exact in floats
    assert np.array_equal(pi2, 2.0 * pi1)
    assert c2 == 2.0 * c1
    pi0, c0 = ev.feedback_policy(0.07, 0.0, S)
    assert np.all(pi0 == 0.0) and c0 == 0.0
    _, c_term = ev.feedback_policy(p.T, 7.25, S)
    assert c_term == 7.25


def test_policy_myopic_root_with_zero_coefficients(commodity_2d):
    # zero coefficient grids kill the hedge term; at the excess-return root
    # the myopic term vanishes too
    p, c = commodity_2d
    ev = PhiEvaluator(_zero_path(p), p, c)
    S = p.mu - p.r / p.alpha
    pi, cons = ev.feedback_policy(0.1, 5.0, S)
    assert np.abs(pi).max() <= 1e-12
    assert cons == pytest.approx(5.0 / (1.0 + (p.T - 0.1)), rel=1e-12)


def test_batched_policy_matches_scalar(commodity_eval):
    p, c, ev = commodity_eval
    S = np.array([[2.0, 2.0], [1.5, 2.5], [2.7, 1.1]])
    x = np.array([25.0, 10.0, 5.0])
    pis, cs = ev.feedback_policy(0.12, x, S)
    for i in range(3):
        pi_i, c_i = ev.feedback_policy(0.12, x[i], S[i])
        # batched einsum reductions round differently in the last ulps
        assert np.allclose(pis[i], pi_i, rtol=1e-12)
        assert cs[i] == pytest.approx(c_i, rel=1e-12)


def test_interpolation_continuity(commodity_eval):
    p, c, ev = commodity_eval
    S = np.array([2.0, 2.0])
    t_node = 10 * ev.path.h
    eps = 1e-9
    left = ev.phi(t_node - eps, S)
    right = ev.phi(t_node + eps, S)
    mid = ev.phi(t_node, S)
    assert left == pytest.approx(mid, rel=1e-6)
    assert right == pytest.approx(mid, rel=1e-6)


def test_overflow_flagged(commodity_eval):
    p, c, ev = commodity_eval
    with pytest.raises(PhiOverflow):
        ev.phi1(0.0, np.array([80.0, 80.0]))


def test_underflow_flagged(commodity_2d):
    p, c = commodity_2d
    path = _zero_path(p)
    path.f0_values[:] = -800.0     # phi1 underflows to zero everywhere
    ev = PhiEvaluator(path, p, c)
    with pytest.raises(PhiUnderflow):
        ev.feedback_policy(0.0, 1.0, np.zeros(2))


def test_out_of_range_time_rejected(commodity_eval):
    p, c, ev = commodity_eval
    with pytest.raises(ValueError):
        ev.phi(p.T + 0.5, np.array([2.0, 2.0]))


def test_phi_lattice_matches_pointwise(flat_1d):
    p, c = flat_1d
    grid = solve_riccati(p, c, scheme="erow3", K=25, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    ev = PhiEvaluator(path, p, c)
    times = np.linspace(0, p.T, 11)
    svals = np.linspace(-10, 10, 9)
    lat = ev.phi_lattice(times, svals)
    for i in (0, 3, 10):
        for k in (0, 4, 8):
            assert lat[i, k] == pytest.approx(ev.phi(times[i], np.array([svals[k]])),
                                              abs=1e-14)


def test_residual_shrinks_at_scheme_order(rich_1d):
    p, c = rich_1d
    s_pts = np.linspace(0.5, 3.5, 7)
    for scheme, tab, lo in (("expeuler", RK2_MIDPOINT, 1.7), ("erow3", RK3_KUTTA, 2.7)):
        res = []
        for K in (8, 16, 32, 64):
            grid = solve_riccati(p, c, scheme=scheme, K=K, need_half_steps=True)
            path = solve_coefficients(p, c, grid, tab)
            res.append(pde_residual_1d(PhiEvaluator(path, p, c), p, c,
                                       s_points=s_pts))
        slope = np.polyfit(np.log2([1 / 8, 1 / 16, 1 / 32, 1 / 64]),
                           np.log2(res), 1)[0]
        assert slope >= lo
