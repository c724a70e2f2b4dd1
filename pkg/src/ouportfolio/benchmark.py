"""Analytic benchmark for the decoupled market (diagonal covariance, varrho = 0).

When sigma sigma' is diagonal and the quadratic discount coefficient vanishes,
the matrix Riccati equation splits into n scalar equations with the explicit
solution

    g_ii(t) = gamma alpha_i / (2 (1-gamma) q_i) * sinh(theta) / (sinh(theta) + c cosh(theta)),

where ``theta = alpha_i (T - t)/c``, ``c = sqrt(1 - gamma)`` and
``q_i = (sigma sigma')_ii``.  The linear coefficient is the weighted integral

    f_i(t) = int_t^T zeta_i(u) exp(int_t^u kappa_i(s) ds) du,
    kappa_i = 2 q_i g_ii - alpha_i/(1-gamma),
    zeta_i  = 2 [alpha_i w_i + gamma (mu_i alpha_i - r)/(1-gamma)] g_ii
              - gamma alpha_i (mu_i alpha_i - r) / ((1-gamma)^2 q_i) - rho_i/(1-gamma),

and the scalar coefficient f0 integrates a polynomial in f and g.  The inner
exponential has the exact form

    exp(int_t^u kappa_i) = D(theta(u)) / D(theta(t)),   D(theta) = sinh(theta) + c cosh(theta),

which this module uses directly; only the outer integrals are evaluated with
composite Simpson rules.  Quadrature resolution is validated by Richardson
comparison against the doubled grid.

These values serve as ground truth for the accuracy and order tests of the
n-dimensional solvers; they never touch the solver code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._quadrature import right_cumulative_simpson_mid
from .market import DerivedConstants, ModelError, ModelParams

#: absolute magnitude allowed for off-diagonal covariance / varrho entries
DECOUPLED_ATOL = 1e-14
#: Richardson error estimate above this raises ResolutionTooCoarse
QUADRATURE_TOL = 1e-8


class ResolutionTooCoarse(RuntimeError):
    """Quadrature grid too coarse for the requested accuracy."""


@dataclass(frozen=True)
class DecoupledParams:
    """Per-asset scalar parameters of the decoupled market."""

    q: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    r: float
    gamma: float
    rho0: float
    T: float

    @property
    def n(self) -> int:
        return self.alpha.size

    @classmethod
    def from_model(cls, params: ModelParams, consts: DerivedConstants,
                   atol: float = DECOUPLED_ATOL) -> "DecoupledParams":
        off = consts.Q - np.diag(np.diag(consts.Q))
        if np.abs(off).max(initial=0.0) > atol:
            raise ModelError("covariance sigma sigma' is not diagonal; no closed form available")
        if np.abs(params.varrho).max(initial=0.0) > atol:
            raise ModelError("varrho must vanish for the closed form")
        return cls(
            q=np.diag(consts.Q).copy(),
            alpha=params.alpha.copy(),
            mu=params.mu.copy(),
            w=consts.w.copy(),
            rho=params.rho.copy(),
            r=params.r,
            gamma=params.gamma,
            rho0=params.rho0,
            T=params.T,
        )


def _theta(dp: DecoupledParams, t) -> np.ndarray:
    """theta_i(t) = alpha_i (T - t)/sqrt(1-gamma); shape (len(t), n)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c = np.sqrt(1.0 - dp.gamma)
    return np.outer(dp.T - t, dp.alpha) / c


def _log_denom(theta: np.ndarray, c: float) -> np.ndarray:
    # log(sinh t + c cosh t), written to stay finite for large theta
    return theta + np.log((1.0 + c) - (1.0 - c) * np.exp(-2.0 * theta)) - np.log(2.0)


def _g_all(dp: DecoupledParams, t) -> np.ndarray:
    theta = _theta(dp, t)
    c = np.sqrt(1.0 - dp.gamma)
    num = -np.expm1(-2.0 * theta)
    den = (1.0 + c) - (1.0 - c) * np.exp(-2.0 * theta)
    scale = dp.gamma * dp.alpha / (2.0 * (1.0 - dp.gamma) * dp.q)
    return scale * num / den


def _zeta_all(dp: DecoupledParams, t) -> np.ndarray:
    g = _g_all(dp, t)
    gam = dp.gamma
    lever = dp.mu * dp.alpha - dp.r
    lin = 2.0 * (dp.alpha * dp.w + gam * lever / (1.0 - gam))
    const = gam * dp.alpha * lever / ((1.0 - gam) ** 2 * dp.q) + dp.rho / (1.0 - gam)
    return lin * g - const


def g_closed(dp: DecoupledParams, i: int, t):
    """Closed form diagonal Riccati solution for asset ``i``; vectorized in t."""
    out = _g_all(dp, t)[:, i]
    return out if np.ndim(t) else float(out[0])


def kappa(dp: DecoupledParams, i: int, t):
    """Integrating-factor rate 2 q_i g_ii(t) - alpha_i/(1-gamma)."""
    out = 2.0 * dp.q[i] * _g_all(dp, t)[:, i] - dp.alpha[i] / (1.0 - dp.gamma)
    return out if np.ndim(t) else float(out[0])


@dataclass(frozen=True)
class _Tab:
    """Benchmark tables on a uniform fine grid over [t0, T]."""

    u: np.ndarray      # (L,)
    g: np.ndarray      # (L, n)
    f: np.ndarray      # (L, n)
    f0: np.ndarray     # (L,)


def _tabulate(dp: DecoupledParams, t0: float, panels: int) -> _Tab:
    if panels < 1:
        raise ValueError("panels must be >= 1")
    if not t0 < dp.T:
        raise ValueError("t0 must lie strictly before the horizon")
    c = np.sqrt(1.0 - dp.gamma)
    gam = dp.gamma
    delta = (dp.T - t0) / panels
    u = t0 + delta * np.arange(panels + 1)
    mid = u[:-1] + 0.5 * delta
    q3 = u[:-1] + 0.75 * delta

    # integrand of the outer f integral: zeta(s) D(theta(s)), scaled by the
    # largest denominator so exponentials stay <= 1
    logd_nodes = _log_denom(_theta(dp, u), c)
    logd_mid = _log_denom(_theta(dp, mid), c)
    logd_q3 = _log_denom(_theta(dp, q3), c)
    ref = logd_nodes[0]
    v_nodes = _zeta_all(dp, u) * np.exp(logd_nodes - ref)
    v_mid = _zeta_all(dp, mid) * np.exp(logd_mid - ref)
    v_q3 = _zeta_all(dp, q3) * np.exp(logd_q3 - ref)

    inc = delta / 6.0 * (v_nodes[:-1] + 4.0 * v_mid + v_nodes[1:])
    F = np.zeros_like(v_nodes)
    F[:-1] = np.cumsum(inc[::-1], axis=0)[::-1]
    F_mid = F[1:] + delta / 12.0 * (v_mid + 4.0 * v_q3 + v_nodes[1:])

    f_nodes = F / np.exp(logd_nodes - ref)
    f_mid = F_mid / np.exp(logd_mid - ref)
    g_nodes = _g_all(dp, u)
    g_mid = _g_all(dp, mid)

    lever = dp.mu * dp.alpha - dp.r
    lin = dp.w * dp.alpha + gam * lever / (1.0 - gam)

    def integrand0(f_vals, g_vals):
        return (lin * f_vals + 0.5 * dp.q * f_vals**2 + dp.q * g_vals).sum(axis=1)

    phi_nodes = integrand0(f_nodes, g_nodes)
    phi_mid = integrand0(f_mid, g_mid)
    f0 = right_cumulative_simpson_mid(phi_nodes, phi_mid, delta)
    drift_const = (gam * lever**2 / (2.0 * (1.0 - gam) ** 2 * dp.q)).sum()
    drift_const += (dp.r * gam - dp.rho0) / (1.0 - gam)
    f0 = f0 + drift_const * (dp.T - u)
    return _Tab(u=u, g=g_nodes, f=f_nodes, f0=f0)


def _point_with_check(dp, t, subintervals, check, extract):
    if not 0.0 <= t <= dp.T:
        raise ValueError(f"t must lie in [0, {dp.T}], got {t}")
    if dp.T - t < 1e-15 * max(1.0, dp.T):
        return 0.0
    coarse = extract(_tabulate(dp, t, subintervals))
    fine = extract(_tabulate(dp, t, 2 * subintervals))
    if check:
        est = abs(fine - coarse) / 15.0
        if est > QUADRATURE_TOL:
            raise ResolutionTooCoarse(
                f"quadrature error estimate {est:.3e} exceeds {QUADRATURE_TOL:g}; "
                f"increase subintervals (got {subintervals})"
            )
    return float(fine)


def f_closed(dp: DecoupledParams, i: int, t: float, subintervals: int = 400,
             check: bool = True) -> float:
    """Linear coefficient f_i(t) by composite Simpson quadrature."""
    return _point_with_check(dp, t, subintervals, check, lambda tab: tab.f[0, i])


def f0_closed(dp: DecoupledParams, t: float, subintervals: int = 400,
              check: bool = True) -> float:
    """Scalar coefficient f0(t) by composite Simpson quadrature."""
    return _point_with_check(dp, t, subintervals, check, lambda tab: tab.f0[0])


def benchmark_table(dp: DecoupledParams, K: int, refine: int = 10):
    """Benchmark (g, f, f0) on the uniform solver grid t_k = k T / K.

    ``refine`` fine quadrature intervals per solver step keep the benchmark
    error well below any tested scheme error.  Returns
    ``(times, g_diag, f, f0)`` with shapes (K+1,), (K+1, n), (K+1, n), (K+1,).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    tab = _tabulate(dp, 0.0, K * refine)
    sl = slice(None, None, refine)
    return tab.u[sl].copy(), tab.g[sl].copy(), tab.f[sl].copy(), tab.f0[sl].copy()


def phi_reference_1d(dp: DecoupledParams, times: np.ndarray, s_values: np.ndarray,
                     refine: int = 10) -> np.ndarray:
    """Reference transformed-value surface phi(t, S) for the single asset case.

    ``times`` must be a uniform ascending grid ending at the horizon; the
    surface is built on a grid refined ``refine``-fold and subsampled, so that
    phi_1 = exp(g S^2 + f S + f0) and its running integral share quadrature
    nodes.  Returns an array of shape (len(times), len(s_values)).
    """
    if dp.n != 1:
        raise ModelError("phi_reference_1d requires a single asset")
    times = np.asarray(times, dtype=float)
    s_values = np.asarray(s_values, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("times must contain at least two nodes")
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("times must be uniform and ascending")
    if abs(times[-1] - dp.T) > 1e-12 * max(1.0, dp.T):
        raise ValueError("times must end at the horizon")

    # double resolution so interval midpoints are tabulated nodes
    fine_panels = 2 * (times.size - 1) * refine
    tab = _tabulate(dp, float(times[0]), fine_panels)
    g = tab.g[:, 0]
    f = tab.f[:, 0]
    f0 = tab.f0
    expo = np.outer(g, s_values**2) + np.outer(f, s_values) + f0[:, None]
    phi1 = np.exp(expo)
    delta = tab.u[2] - tab.u[0]
    phi2 = right_cumulative_simpson_mid(phi1[::2], phi1[1::2], delta)
    phi = phi1[::2] + phi2
    return phi[:: refine].copy()
