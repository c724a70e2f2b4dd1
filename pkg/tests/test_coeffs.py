import numpy as np
import pytest

from ouportfolio import (CoeffRhs, CoefficientPath, DecoupledParams,
                         DerivedConstants, MissingStageValue, ModelParams,
                         RK2_MIDPOINT, RK3_KUTTA, RiccatiGrid, RkTableau,
                         StepTooLarge, benchmark_table, f0_closed, f_closed,
                         g_closed, rhs_F, rhs_F0, solve_coefficients,
                         solve_riccati, validate)
from ouportfolio.benchmark import _g_all
from conftest import make_decoupled


def test_tableau_consistency_enforced():
    with pytest.raises(ValueError):
        RkTableau(order=2, l=(0.0, 0.5), d=(0.5, 0.6), m=((), (0.5,)), name="bad")
    with pytest.raises(ValueError):
        RkTableau(order=2, l=(0.0, 0.5), d=(0.0, 1.0), m=((), (0.4,)), name="bad")
    assert sum(RK3_KUTTA.d) == pytest.approx(1.0, abs=1e-15)


def test_rhs_constant_part(commodity_2d):
    p, c = commodity_2d
    co = CoeffRhs.from_model(p, c)
    out = rhs_F(co, np.zeros((2, 2)), np.zeros(2))
    assert np.allclose(out, co.D, atol=0.0)


def test_rhs_lipschitz_in_f(commodity_2d):
    p, c = commodity_2d
    co = CoeffRhs.from_model(p, c)
    rng = np.random.default_rng(9)
    for _ in range(50):
        g = rng.normal(scale=0.4, size=(2, 2))
        g = 0.5 * (g + g.T)
        f1, f2 = rng.normal(size=2), rng.normal(size=2)
        lhs = np.linalg.norm(rhs_F(co, g, f1) - rhs_F(co, g, f2))
        bound = np.linalg.norm(co.A + g @ co.B, 2) * np.linalg.norm(f1 - f2)
        assert lhs <= bound * (1 + 1e-12)


def test_rhs_matches_closed_form_derivative(flat_1d):
    # F evaluated on the closed-form pair equals f'(t) there
    p, c = flat_1d
    dp = DecoupledParams.from_model(p, c)
    co = CoeffRhs.from_model(p, c)
    t, eps = 0.5, 1e-4
    gmat = np.array([[g_closed(dp, 0, t)]])
    fvec = np.array([f_closed(dp, 0, t, subintervals=800)])
    fd = (f_closed(dp, 0, t + eps, subintervals=800)
          - f_closed(dp, 0, t - eps, subintervals=800)) / (2 * eps)
    assert rhs_F(co, gmat, fvec)[0] == pytest.approx(fd, abs=1e-6)


def test_rhs_f0_degenerate_zero():
    # r = 0 and mu = 0 make the excess vanish; with rho0 = 0 and zero states
    # the whole right-hand side collapses
    p = ModelParams(r=0.0, gamma=0.5, rho0=0.0, rho=[0.0], varrho=[[0.0]],
                    alpha=[0.4], mu=[0.0], sigma=[[1.0]], T=1.0)
    c = validate(p)
    co = CoeffRhs.from_model(p, c)
    assert rhs_F0(co, np.zeros((1, 1)), np.zeros(1)) == pytest.approx(0.0, abs=1e-15)


def test_rhs_f0_trace_direction(commodity_2d):
    p, c = commodity_2d
    co = CoeffRhs.from_model(p, c)
    g = np.array([[0.3, 0.1], [0.1, 0.2]])
    f = np.array([0.4, -0.2])
    eps = 1e-4
    delta = rhs_F0(co, g + eps * np.eye(2), f) - rhs_F0(co, g, f)
    assert delta == pytest.approx(-eps * np.trace(c.Q), rel=1e-10)


def test_rhs_f0_matches_closed_form_slope():
    p = make_decoupled(5, 42)
    c = validate(p)
    dp = DecoupledParams.from_model(p, c)
    co = CoeffRhs.from_model(p, c)
    _, g_b, f_b, _ = benchmark_table(dp, 10, refine=40)
    got = rhs_F0(co, np.diag(g_b[0]), f_b[0])
    # second-order one-sided difference at the left endpoint
    eps = 1e-4
    f0 = [f0_closed(dp, t, subintervals=1000) for t in (0.0, eps, 2 * eps)]
    slope = (-3 * f0[0] + 4 * f0[1] - f0[2]) / (2 * eps)
    assert got == pytest.approx(slope, abs=1e-5)


def test_constant_rhs_exact_for_any_tableau():
    # all coefficient blocks vanish except D: exact solution f(t) = -(T - t) D
    d = np.array([0.7])
    params = ModelParams(r=0.0, gamma=0.5, rho0=0.0, rho=d * 0.5, varrho=[[0.0]],
                         alpha=[0.0], mu=[0.0], sigma=[[1.0]], T=1.0)
    consts = DerivedConstants(w=np.zeros(1), Q=np.eye(1), Qinv=np.eye(1),
                              Adiag=np.zeros((1, 1)), Gamma=np.zeros((1, 1)),
                              excess=np.zeros(1))
    grid = RiccatiGrid(T=1.0, h=1.0, K=1, values=np.zeros((2, 1, 1)),
                       half_values=np.zeros((1, 1, 1)), scheme="erow3")
    for tab in (RK2_MIDPOINT, RK3_KUTTA):
        path = solve_coefficients(params, consts, grid, tab)
        assert path.f_values[0, 0] == pytest.approx(-0.7, rel=1e-14)
        assert np.all(path.f_values[1] == 0.0)


def test_terminal_exactness(commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=16, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    assert np.all(path.f_values[-1] == 0.0)
    assert path.f0_values[-1] == 0.0


def test_missing_half_steps_raises(commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=8, need_half_steps=False)
    with pytest.raises(MissingStageValue):
        solve_coefficients(p, c, grid, RK3_KUTTA)


def test_unsupported_abscissa_raises(commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=8, need_half_steps=True)
    odd = RkTableau(order=2, l=(0.0, 0.75), d=(0.0, 1.0), m=((), (0.75,)), name="odd")
    with pytest.raises(MissingStageValue):
        solve_coefficients(p, c, grid, odd)


def test_step_cap_enforced():
    p = ModelParams(r=0.5, gamma=0.5, rho0=0.0, rho=[0.0], varrho=[[0.0]],
                    alpha=[50.0], mu=[1.0], sigma=[[1.0]], T=1.0)
    c = validate(p)
    grid = solve_riccati(p, c, scheme="erow3", K=10, need_half_steps=True)
    with pytest.raises(StepTooLarge):
        solve_coefficients(p, c, grid, RK3_KUTTA)


def test_global_orders():
    p = make_decoupled(3, 11)
    c = validate(p)
    dp = DecoupledParams.from_model(p, c)
    for tab, lo, hi in ((RK2_MIDPOINT, 1.7, 2.3), (RK3_KUTTA, 2.7, 3.3)):
        scheme = "expeuler" if tab.order == 2 else "erow3"
        ef, ef0 = [], []
        for k in range(3, 8):
            K = 2**k
            grid = solve_riccati(p, c, scheme=scheme, K=K, need_half_steps=True)
            path = solve_coefficients(p, c, grid, tab)
            _, _, f_b, f0_b = benchmark_table(dp, K)
            ef.append(np.linalg.norm(path.f_values - f_b, axis=1).max()
                      / (1 + np.abs(f_b).max()))
            ef0.append(np.abs(path.f0_values - f0_b).max() / (1 + np.abs(f0_b).max()))
        hs = [2.0**-k for k in range(3, 8)]
        for errs in (ef, ef0):
            slope = np.polyfit(np.log2(hs), np.log2(errs), 1)[0]
            assert lo <= slope <= hi


def test_coupling_consistency():
    # swapping the numerical g grid for the exact one moves f by O(h^p) only
    p = make_decoupled(3, 11)
    c = validate(p)
    dp = DecoupledParams.from_model(p, c)
    K = 32
    grid = solve_riccati(p, c, scheme="erow3", K=K, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    times = grid.times
    exact_nodes = np.stack([np.diag(row) for row in _g_all(dp, times)])
    exact_half = np.stack([np.diag(row) for row in _g_all(dp, times[:-1] + grid.h / 2)])
    exact_grid = RiccatiGrid(T=grid.T, h=grid.h, K=K, values=exact_nodes,
                             half_values=exact_half, scheme="erow3")
    path_exact = solve_coefficients(p, c, exact_grid, RK3_KUTTA)
    shift = np.linalg.norm(path.f_values - path_exact.f_values, axis=1).max()
    _, _, f_b, _ = benchmark_table(dp, K)
    own_err = np.linalg.norm(path_exact.f_values - f_b, axis=1).max()
    assert shift <= 10 * max(own_err, 1e-12)


def test_save_load_round_trip(tmp_path, commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="expeuler", K=6, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK2_MIDPOINT)
    f = tmp_path / "path.npz"
    path.save(f)
    back = CoefficientPath.load(f)
    assert back.scheme == "expeuler-rk2"
    assert np.array_equal(back.f_values, path.f_values)
    assert np.array_equal(back.f0_values, path.f0_values)
    assert np.array_equal(back.g_values, path.g_values)
    assert np.array_equal(back.g_half, path.g_half)


def test_csv_export(tmp_path, commodity_2d):
    p, c = commodity_2d
    grid = solve_riccati(p, c, scheme="erow3", K=4, need_half_steps=True)
    path = solve_coefficients(p, c, grid, RK3_KUTTA)
    out = tmp_path / "coeffs.csv"
    path.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,f1,f2,f0"
    assert len(lines) == path.K + 2
    last = [float(x) for x in lines[-1].split(",")]
    assert last[1:] == [0.0, 0.0, 0.0]
