"""Reconstruction of the transformed value phi, the value function and the policy.

From a coefficient path the exponential factor

    phi1(t, S) = exp(S' g(t) S + S' f(t) + f0(t))

is evaluated directly; the full transformed value adds its running integral,
phi = phi1 + int_t^T phi1(u, S) du, computed by a node-based quadrature on the
solver grid (trapezoid for the second-order pair, a three-node quadratic rule
for the third-order pair, so reconstruction error stays at or below the
integrator error).  Coefficients are interpolated linearly for off-grid t;
grid resolution is therefore part of the accuracy contract.

The candidate value function and the feedback policy follow:

    v(t, x, S, psi) = psi^(1-gamma) x^gamma phi(t, S)^(1-gamma) / gamma,
    pi*(t, x, S)    = x/(1-gamma) Q^{-1} (diag(alpha)(mu - S) - r e) + x grad phi / phi,
    C*(t, x, S)     = x / phi.

All evaluators broadcast over a leading batch axis of S so Monte Carlo
policies evaluate path-vectorized.
"""

from __future__ import annotations

import numpy as np

from ._quadrature import right_cumulative_quadratic, right_cumulative_trapezoid
from .coeffs import CoefficientPath
from .market import DerivedConstants, DimensionMismatch, ModelParams, field_H

#: exponent cap before phi1 is declared overflowed
EXPONENT_CAP = 700.0
#: phi below this raises PhiUnderflow in the feedback policy
PHI_FLOOR = 1e-300

_NODE_TOL = 1e-9


class PhiOverflow(FloatingPointError):
    """Exponent of phi1 exceeded the configured cap."""


class PhiUnderflow(FloatingPointError):
    """phi too small to divide by in the feedback policy."""


class NonPositiveWealth(ValueError):
    """Wealth must be strictly positive for value evaluation."""


class PhiEvaluator:
    """Read-only evaluator over a coefficient path; safe for concurrent use."""

    def __init__(self, path: CoefficientPath, params: ModelParams, consts: DerivedConstants):
        if path.n != params.n:
            raise DimensionMismatch(f"path has {path.n} assets, params have {params.n}")
        self.path = path
        self.params = params
        self.consts = consts
        self._rule = (right_cumulative_quadratic if path.scheme.endswith("rk3")
                      else right_cumulative_trapezoid)

    # -- coefficient access ------------------------------------------------

    def _locate(self, t: float):
        """Node index at or right of t plus an exact-node flag."""
        T, h, K = self.path.T, self.path.h, self.path.K
        if not -1e-12 <= t <= T * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"t must lie in [0, {T}], got {t}")
        t = min(max(t, 0.0), T)
        pos = t / h
        j = int(round(pos))
        if abs(pos - j) <= _NODE_TOL:
            return t, j, True
        return t, int(np.ceil(pos)), False

    def coeffs_at(self, t: float):
        """(g, f, f0) at t, linearly interpolated between grid nodes."""
        t, j, on_node = self._locate(t)
        p = self.path
        if on_node:
            return p.g_values[j], p.f_values[j], float(p.f0_values[j])
        lam = (j * p.h - t) / p.h
        g = lam * p.g_values[j - 1] + (1.0 - lam) * p.g_values[j]
        f = lam * p.f_values[j - 1] + (1.0 - lam) * p.f_values[j]
        f0 = lam * p.f0_values[j - 1] + (1.0 - lam) * p.f0_values[j]
        return g, f, float(f0)

    # -- core evaluation ---------------------------------------------------

    def _flatten(self, S):
        S = np.asarray(S, dtype=float)
        if S.shape[-1] != self.params.n:
            raise DimensionMismatch(f"S: last axis must have length {self.params.n}")
        lead = S.shape[:-1]
        return np.atleast_2d(S.reshape(-1, self.params.n)), lead

    @staticmethod
    def _exp_checked(expo: np.ndarray) -> np.ndarray:
        if np.max(expo, initial=-np.inf) > EXPONENT_CAP:
            raise PhiOverflow(f"phi1 exponent {np.max(expo):.3g} exceeds cap {EXPONENT_CAP:g}")
        return np.exp(expo)

    def _phi1_nodes(self, S_flat: np.ndarray) -> np.ndarray:
        """phi1 at every grid node: shape (K+1, B)."""
        p = self.path
        quad = np.einsum("bi,kij,bj->kb", S_flat, p.g_values, S_flat)
        lin = p.f_values @ S_flat.T
        return self._exp_checked(quad + lin + p.f0_values[:, None])

    def _phi1_at(self, t: float, S_flat: np.ndarray) -> np.ndarray:
        g, f, f0 = self.coeffs_at(t)
        expo = np.einsum("bi,ij,bj->b", S_flat, g, S_flat) + S_flat @ f + f0
        return self._exp_checked(expo)

    def phi1(self, t: float, S):
        """Exponential factor; strictly positive."""
        S_flat, lead = self._flatten(S)
        out = self._phi1_at(t, S_flat)
        return out.reshape(lead) if lead else float(out[0])

    def phi2(self, t: float, S):
        """Running integral of phi1 over [t, T]."""
        S_flat, lead = self._flatten(S)
        out = self._phi2_flat(t, S_flat)
        return out.reshape(lead) if lead else float(out[0])

    def _phi2_flat(self, t: float, S_flat: np.ndarray) -> np.ndarray:
        t, j, on_node = self._locate(t)
        P = self._phi1_nodes(S_flat)
        cum = self._rule(P, self.path.h)
        out = cum[j]
        if not on_node:
            head = self._phi1_at(t, S_flat)
            out = out + 0.5 * (j * self.path.h - t) * (head + P[j])
        return out

    def phi(self, t: float, S):
        """phi = phi1 + phi2; strictly positive."""
        S_flat, lead = self._flatten(S)
        out = self._phi1_at(t, S_flat) + self._phi2_flat(t, S_flat)
        return out.reshape(lead) if lead else float(out[0])

    def grad_phi(self, t: float, S):
        """Spatial gradient: phi1 (f + 2 g S) plus the integral of the same
        integrand over [t, T]."""
        S_flat, lead = self._flatten(S)
        out = self._grad_flat(t, S_flat)
        return out.reshape(lead + (self.params.n,)) if lead else out[0]

    def _grad_flat(self, t: float, S_flat: np.ndarray) -> np.ndarray:
        t, j, on_node = self._locate(t)
        p = self.path
        P = self._phi1_nodes(S_flat)
        direction = p.f_values[:, None, :] + 2.0 * np.einsum("bi,kij->kbj", S_flat, p.g_values)
        integrand = P[:, :, None] * direction
        cum = self._rule(integrand, p.h)
        g_t, f_t, _ = self.coeffs_at(t)
        head = self._phi1_at(t, S_flat)[:, None] * (f_t[None, :] + 2.0 * S_flat @ g_t)
        out = head + cum[j]
        if not on_node:
            # trapezoid over the partial interval [t, t_j]; the pointwise term
            # doubles as the integrand value at t
            out = out + 0.5 * (j * p.h - t) * (head + integrand[j])
        return out

    # -- value function and policy ------------------------------------------

    def value(self, t: float, x, S, psi) -> float:
        """Candidate value gamma^{-1} psi^{1-gamma} x^gamma phi^{1-gamma}."""
        x = float(x)
        psi = float(psi)
        if x <= 0.0:
            raise NonPositiveWealth(f"wealth must be positive, got {x}")
        if psi <= 0.0:
            raise ValueError(f"discount factor must be positive, got {psi}")
        g = self.params.gamma
        phi = self.phi(t, S)
        return psi ** (1.0 - g) * x**g * phi ** (1.0 - g) / g

    def feedback_policy(self, t: float, x, S):
        """Optimal feedback (pi, C); linear in wealth, C = x / phi >= 0."""
        S_flat, lead = self._flatten(S)
        x_arr = np.broadcast_to(np.asarray(x, dtype=float), lead if lead else ()).reshape(-1)
        if x_arr.size == 1 and S_flat.shape[0] > 1:
            x_arr = np.full(S_flat.shape[0], float(x_arr[0]))
        g = self.params.gamma
        phi = self._phi1_at(t, S_flat) + self._phi2_flat(t, S_flat)
        if np.min(phi) < PHI_FLOOR:
            raise PhiUnderflow(f"phi underflowed the floor {PHI_FLOOR:g}")
        myopic = (self.consts.excess[None, :] - S_flat * self.params.alpha) @ self.consts.Qinv
        grad = self._grad_flat(t, S_flat)
        pi = x_arr[:, None] * (myopic / (1.0 - g) + grad / phi[:, None])
        consumption = x_arr / phi
        if lead:
            return pi.reshape(lead + (self.params.n,)), consumption.reshape(lead)
        return pi[0], float(consumption[0])

    # -- exports -------------------------------------------------------------

    def phi_lattice(self, times, s_values) -> np.ndarray:
        """phi on a rectangular (t, S) lattice for the single-asset case.

        The node quadrature is shared across all query times, so the cost is
        one phi1 node matrix plus one interpolated row per time.
        """
        if self.params.n != 1:
            raise DimensionMismatch("phi_lattice requires a single asset")
        p = self.path
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < -1e-12 or times.max() > p.T + 1e-12):
            raise ValueError(f"times must lie in [0, {p.T}]")
        times = np.clip(times, 0.0, p.T)
        s_row = np.asarray(s_values, dtype=float).reshape(1, -1)
        s_col = s_row.reshape(-1, 1)
        P = self._phi1_nodes(s_col)
        cum = self._rule(P, p.h)

        pos = times / p.h
        j = np.ceil(pos - _NODE_TOL).astype(int)
        lam = (j * p.h - times) / p.h          # 0 on nodes, in (0, 1) between
        g1 = p.g_values[:, 0, 0]
        expo = ((lam * g1[np.maximum(j - 1, 0)] + (1 - lam) * g1[j])[:, None] * s_row**2
                + (lam * p.f_values[np.maximum(j - 1, 0), 0]
                   + (1 - lam) * p.f_values[j, 0])[:, None] * s_row
                + (lam * p.f0_values[np.maximum(j - 1, 0)]
                   + (1 - lam) * p.f0_values[j])[:, None])
        head = self._exp_checked(expo)
        partial = 0.5 * ((j * p.h - times)[:, None]) * (head + P[j])
        return head + cum[j] + partial


def pde_residual_1d(ev: PhiEvaluator, params: ModelParams, consts: DerivedConstants,
                    s_points, ds: float = 0.02) -> float:
    """Max residual of the transformed equation on interior grid nodes.

    phi_t + a(S) phi_S + H(S) phi + Q phi_SS / 2 + 1 with
    a(S) = alpha (w - S) + gamma (alpha (mu - S) - r)/(1 - gamma), all
    derivatives by fourth-order central differences (time stencil on the
    solver grid, spatial stencil with step ``ds``).
    """
    if params.n != 1:
        raise DimensionMismatch("residual check requires a single asset")
    path = ev.path
    K, h = path.K, path.h
    if K < 4:
        raise ValueError("need at least 4 time steps for the interior stencil")
    s_points = np.asarray(s_points, dtype=float).reshape(-1)
    offsets = ds * np.arange(-2, 3)
    s_ext = (s_points[:, None] + offsets[None, :]).reshape(-1)
    lattice = ev.phi_lattice(path.times, s_ext).reshape(K + 1, s_points.size, 5)

    inner = slice(2, K - 1)
    phi_t = (-lattice[4:, :, 2] + 8.0 * lattice[3:-1, :, 2]
             - 8.0 * lattice[1:-3, :, 2] + lattice[:-4, :, 2]) / (12.0 * h)
    mid = lattice[inner]
    phi_s = (-mid[:, :, 4] + 8.0 * mid[:, :, 3] - 8.0 * mid[:, :, 1] + mid[:, :, 0]) / (12.0 * ds)
    phi_ss = (-mid[:, :, 4] + 16.0 * mid[:, :, 3] - 30.0 * mid[:, :, 2]
              + 16.0 * mid[:, :, 1] - mid[:, :, 0]) / (12.0 * ds**2)

    alpha = params.alpha[0]
    gam = params.gamma
    drift = alpha * (consts.w[0] - s_points) + gam * (alpha * (params.mu[0] - s_points)
                                                      - params.r) / (1.0 - gam)
    hvals = np.array([field_H(params, consts, np.array([s])) for s in s_points])
    q = consts.Q[0, 0]
    resid = phi_t + drift[None, :] * phi_s + hvals[None, :] * mid[:, :, 2] \
        + 0.5 * q * phi_ss + 1.0
    return float(np.abs(resid).max())
