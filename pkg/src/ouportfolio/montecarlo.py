"""Seeded Monte Carlo engine for policy evaluation.

Log prices follow the OU system dS = diag(alpha)(w - S) dt + sigma dB and
wealth follows

    dX = r X dt + pi'(diag(alpha)(mu - S) - r e) dt - C dt + pi' sigma dB,

driven by the same Brownian increments.  Policies map (t, X, S) to dollar
positions pi and a consumption rate C >= 0, re-evaluated on a coarse policy
grid and held fixed over ``substeps`` Euler-Maruyama substeps.  The Gaussian
increment stream depends only on (seed, paths, total steps), so two policies
simulated with the same seed consume identical noise (common random numbers)
and their utilities can be compared pathwise.

The realized objective per path is the Riemann sum of the discounted running
utility plus the terminal term, with U(t, c) = psi(t)^(1-gamma) c^gamma / gamma
and psi accumulated by an exponentiated trapezoid rule (always positive).
Wealth is kept nonnegative by absorption: a path whose Euler update crosses
zero is floored there and stops trading; the count is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .market import DerivedConstants, DimensionMismatch, ModelParams
from .valuation import PhiEvaluator
from .verification import ou_moments

_POLICY_STREAM_KEY = 0x5EED


class NonFinitePath(RuntimeError):
    """A simulated path produced a non-finite value."""


class MissingPhi(ValueError):
    """The numerical feedback policy needs a value evaluator."""


@dataclass
class Policy:
    """Named feedback rule mapping batched (t, X, S) to (pi, C)."""

    name: str
    rule: Callable
    seed_stream: bool = False
    rule_text: tuple = ("", "", "")     # printable (pi_1, ..., pi_n, C) descriptions


@dataclass
class SimulationEnsemble:
    """Paths of (S, X, psi) on the simulation grid plus applied controls."""

    times: np.ndarray            # (N_sub + 1,)
    policy_times: np.ndarray     # (N_pol,)
    S: np.ndarray                # (M, N_sub + 1, n)
    X: np.ndarray                # (M, N_sub + 1)
    psi: np.ndarray              # (M, N_sub + 1)
    pi: np.ndarray               # (M, N_pol, n) positions chosen at policy nodes
    C: np.ndarray                # (M, N_sub) applied consumption rate per substep
    pi0: np.ndarray              # (M, N_pol) bond position X - sum(pi)
    seed: int
    policy_name: str
    substeps: int
    absorbed: np.ndarray         # (M,) bool
    mean_utility: float = field(default=np.nan)
    std_error: float = field(default=np.nan)

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    @property
    def absorbed_count(self) -> int:
        return int(self.absorbed.sum())


def _beta_tilde(params: ModelParams, S: np.ndarray) -> np.ndarray:
    # rho0 + S'rho + S'varrho S, batched over the leading axis
    return params.rho0 + S @ params.rho + np.einsum("mi,ij,mj->m", S, params.varrho, S)


def simulate_paths(params: ModelParams, consts: DerivedConstants, policy: Policy,
                   n_paths: int, n_steps: int, seed: int, x0: float, s0,
                   substeps: int = 1, exact_ou: bool = False) -> SimulationEnsemble:
    """Simulate ``n_paths`` trajectories under one policy.

    ``n_steps`` is the policy grid resolution; each policy step is divided
    into ``substeps`` Euler-Maruyama substeps.  Identical (seed, n_paths,
    n_steps, substeps) yield identical Gaussian draws for every policy.
    """
    n = params.n
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (n,):
        raise DimensionMismatch(f"s0: expected shape ({n},), got {s0.shape}")
    if n_paths < 1 or n_steps < 1 or substeps < 1:
        raise ValueError("n_paths, n_steps and substeps must be positive")
    M = n_paths
    n_sub = n_steps * substeps
    dt = params.T / n_sub
    sqdt = np.sqrt(dt)

    rng = np.random.default_rng(int(seed))
    noise = rng.standard_normal((n_sub, M, n))
    pol_rng = np.random.default_rng((int(seed), _POLICY_STREAM_KEY)) if policy.seed_stream else None

    alpha = params.alpha
    if exact_ou:
        decay = np.exp(-alpha * dt)
        step_cov = ou_moments(consts, 0.0, np.zeros(n), dt).Sigma
        chol = np.linalg.cholesky(step_cov)

    S = np.empty((M, n_sub + 1, n))
    X = np.empty((M, n_sub + 1))
    psi = np.empty((M, n_sub + 1))
    S[:, 0] = s0
    X[:, 0] = x0
    psi[:, 0] = 1.0
    pi_rec = np.zeros((M, n_steps, n))
    pi0_rec = np.zeros((M, n_steps))
    C_sub = np.zeros((M, n_sub))
    alive = np.ones(M, dtype=bool)

    beta_cur = _beta_tilde(params, S[:, 0])
    for kp in range(n_steps):
        t_k = kp * params.T / n_steps
        i0 = kp * substeps
        pi, c = policy.rule(t_k, X[:, i0], S[:, i0], pol_rng)
        pi = np.asarray(pi, dtype=float).reshape(M, n)
        c = np.asarray(c, dtype=float).reshape(M)
        if np.any(c[alive] < 0.0):
            raise ValueError(f"policy {policy.name!r} produced a negative consumption rate")
        pi = np.where(alive[:, None], pi, 0.0)
        c = np.where(alive, c, 0.0)
        pi_rec[:, kp] = pi
        pi0_rec[:, kp] = X[:, i0] - pi.sum(axis=1)

        for ks in range(substeps):
            i = i0 + ks
            z = noise[i]
            db = sqdt * z
            pi_eff = np.where(alive[:, None], pi, 0.0)
            c_eff = np.where(alive, c, 0.0)
            C_sub[:, i] = c_eff

            risk_drift = (pi_eff * (consts.excess[None, :] - alpha * S[:, i])).sum(axis=1)
            gain = (pi_eff @ params.sigma * db).sum(axis=1)
            x_next = X[:, i] + (params.r * X[:, i] + risk_drift - c_eff) * dt + gain

            if exact_ou:
                s_next = consts.w + (S[:, i] - consts.w) * decay + z @ chol.T
            else:
                s_next = S[:, i] + alpha * (consts.w - S[:, i]) * dt + db @ params.sigma.T

            hit = alive & (x_next < 0.0)
            if np.any(hit):
                x_next = np.where(hit, 0.0, x_next)
                alive = alive & ~hit
            X[:, i + 1] = x_next
            S[:, i + 1] = s_next
            beta_next = _beta_tilde(params, s_next)
            psi[:, i + 1] = psi[:, i] * np.exp(-0.5 * dt * (beta_cur + beta_next)
                                               / (1.0 - params.gamma))
            beta_cur = beta_next

        if not (np.all(np.isfinite(X[:, i0 + substeps])) and
                np.all(np.isfinite(S[:, i0 + substeps]))):
            bad = np.nonzero(~np.isfinite(X[:, i0 + substeps]))[0]
            bad = bad[0] if bad.size else np.nonzero(
                ~np.isfinite(S[:, i0 + substeps]).all(axis=1))[0][0]
            raise NonFinitePath(f"path {int(bad)} became non-finite by policy step {kp}")

    ens = SimulationEnsemble(
        times=dt * np.arange(n_sub + 1),
        policy_times=(params.T / n_steps) * np.arange(n_steps),
        S=S, X=X, psi=psi, pi=pi_rec, C=C_sub, pi0=pi0_rec,
        seed=int(seed), policy_name=policy.name, substeps=substeps,
        absorbed=~alive,
    )
    ens.mean_utility, ens.std_error = mean_utility(ens, params)
    return ens


def path_utilities(ens: SimulationEnsemble, params: ModelParams) -> np.ndarray:
    """Realized objective per path: sum of running utility plus terminal utility."""
    g = params.gamma
    dt = ens.times[1] - ens.times[0]
    running = (ens.psi[:, :-1] ** (1.0 - g) * ens.C ** g).sum(axis=1) * dt / g
    terminal = ens.psi[:, -1] ** (1.0 - g) * ens.X[:, -1] ** g / g
    return running + terminal


def mean_utility(ens: SimulationEnsemble, params: ModelParams):
    """Monte Carlo estimate of the objective and its standard error."""
    u = path_utilities(ens, params)
    m = u.size
    se = float(u.std(ddof=1) / np.sqrt(m)) if m > 1 else np.nan
    return float(u.mean()), se


def _fraction_policy(name: str, weights, c_frac: float, text: tuple) -> Policy:
    w = np.asarray(weights, dtype=float)

    def rule(t, x, s, rng):
        return x[:, None] * w[None, :], c_frac * x

    return Policy(name=name, rule=rule, rule_text=text)


def _random_policy(redraw: str) -> Policy:
    state = {}

    def rule(t, x, s, rng):
        if rng is None:
            raise ValueError("random policy needs its seeded stream")
        m = x.shape[0]
        if redraw == "step":
            xi = rng.uniform(size=(3, m))
        else:
            if "xi" not in state or state["xi"].shape[1] != m:
                state["xi"] = rng.uniform(size=(3, m))
            xi = state["xi"]
        pi = np.stack([xi[0] * x / 2.0, xi[1] * x / 2.0], axis=1)
        return pi, xi[2] * x / 4.0

    return Policy(name="Random", rule=rule, seed_stream=True,
                  rule_text=("xi1*X/2", "xi2*X/2", "xi3*X/4"))


def numerical_policy(phi: PhiEvaluator) -> Policy:
    """Feedback policy reconstructed from the solved coefficients."""
    if phi is None:
        raise MissingPhi("the numerical policy needs a value evaluator")

    def rule(t, x, s, rng):
        return phi.feedback_policy(t, x, s)

    return Policy(name="Our Numerical Policy", rule=rule,
                  rule_text=("feedback", "feedback", "X/phi"))


_STATIC_POLICIES = (
    ("Riskless", (0.0, 0.0), 0.5, ("0", "0", "X/2")),
    ("No Consumption", (1.0 / 3.0, 1.0 / 3.0), 0.0, ("X/3", "X/3", "0")),
    ("No Consumption (alt.)", (0.25, 0.5), 0.0, ("X/4", "X/2", "0")),
    ("No Bonds", (0.5, 0.5), 0.25, ("X/2", "X/2", "X/4")),
    ("No Bonds (alt.)", (2.0 / 3.0, 1.0 / 3.0), 1.0 / 3.0, ("2X/3", "X/3", "X/3")),
    ("Balanced Leverage", (1.0, -0.5), 0.5, ("X", "-X/2", "X/2")),
    ("Moderate Leverage", (3.0, -2.5), 1.0 / 3.0, ("3X", "-2.5X", "X/3")),
    ("High Leverage", (-5.0, 5.0), 2.0 / 3.0, ("-5X", "5X", "2X/3")),
    ("Extreme Leverage", (-8.0, 10.0), 0.25, ("-8X", "10X", "X/4")),
)


def policy_library(params: ModelParams, phi: PhiEvaluator | None = None,
                   include_numerical: bool | None = None,
                   random_redraw: str = "step") -> list:
    """The two-asset comparison set: ten reference policies plus, when an
    evaluator is supplied, the numerical feedback policy."""
    if params.n != 2:
        raise DimensionMismatch("the policy library is specified for two risky assets")
    if random_redraw not in ("step", "path"):
        raise ValueError(f"random_redraw must be 'step' or 'path', got {random_redraw!r}")
    if include_numerical is None:
        include_numerical = phi is not None
    policies = [_fraction_policy(name, w, cf, text) for name, w, cf, text in _STATIC_POLICIES[:5]]
    policies.append(_random_policy(random_redraw))
    policies.extend(_fraction_policy(name, w, cf, text)
                    for name, w, cf, text in _STATIC_POLICIES[5:])
    if include_numerical:
        policies.append(numerical_policy(phi))
    return policies
