"""Model parameters, derived constants and the quadratic state field.

The market holds one bond with constant rate ``r`` and ``n`` risky assets
whose log prices follow the mean-reverting system

    dS = diag(alpha) (w - S) dt + sigma dB,      w_i = mu_i + |sigma_i|^2 / (2 alpha_i),

where ``sigma_i`` is the i-th row of the volatility matrix.  Preferences are
power utility with exponent ``gamma`` in (0, 1), discounted by a state
dependent factor driven by the quadratic form ``rho0 + S'rho + S'varrho S``.

Everything downstream (ODE solvers, verification, simulation) consumes a
validated ``(ModelParams, DerivedConstants)`` pair.  Both are immutable and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: relative Frobenius asymmetry accepted for varrho before exact symmetrization
VARRHO_SYMMETRY_RTOL = 1e-10
#: singular values of sigma below this multiple of the largest are treated as rank loss
SIGMA_RANK_RTOL = 1e-12


class ModelError(ValueError):
    """Invalid or inconsistent model parameters."""


class DimensionMismatch(ModelError):
    """A field's shape disagrees with the asset count."""


class NonPositiveAlpha(ModelError):
    """Mean-reversion speeds must be strictly positive."""


class SingularSigma(ModelError):
    """Volatility matrix is numerically rank deficient."""


class GammaOutOfRange(ModelError):
    """Utility exponent must lie strictly inside (0, 1)."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Market and utility constants.

    Parameters are normalized (float arrays, varrho exactly symmetrized) at
    construction; all invariants are enforced by :func:`validate`.
    """

    r: float
    gamma: float
    rho0: float
    rho: np.ndarray
    varrho: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    T: float

    def __post_init__(self):
        for name in ("r", "gamma", "rho0", "T"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("rho", "alpha", "mu"):
            object.__setattr__(self, name, _frozen(np.atleast_1d(getattr(self, name))))
        sigma = np.atleast_2d(np.array(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", _frozen(sigma))
        varrho = np.atleast_2d(np.array(self.varrho, dtype=float))
        if varrho.shape[0] == varrho.shape[1]:
            asym = np.linalg.norm(varrho - varrho.T)
            if asym > VARRHO_SYMMETRY_RTOL * max(1.0, np.linalg.norm(varrho)):
                raise ModelError(
                    f"varrho: relative asymmetry {asym:.3e} exceeds tolerance "
                    f"{VARRHO_SYMMETRY_RTOL:g}"
                )
            varrho = 0.5 * (varrho + varrho.T)
        object.__setattr__(self, "varrho", _frozen(varrho))

    @property
    def n(self) -> int:
        """Number of risky assets."""
        return self.alpha.size


@dataclass(frozen=True)
class DerivedConstants:
    """Constant matrices derived from validated parameters.

    w       long-run level of the log-price system
    Q       covariance sigma sigma'
    Qinv    its inverse
    Adiag   diag(alpha)
    Gamma   diag(alpha) Q^{-1} diag(alpha), symmetric positive definite
    excess  diag(alpha) mu - r e, the excess drift at S = 0
    """

    w: np.ndarray
    Q: np.ndarray
    Qinv: np.ndarray
    Adiag: np.ndarray
    Gamma: np.ndarray
    excess: np.ndarray


def validate(params: ModelParams) -> DerivedConstants:
    """Check every model invariant and build the derived constants.

    Raises the specific ``ModelError`` subclass naming the offending field.
    """
    n = params.n
    for name in ("rho", "mu"):
        if getattr(params, name).shape != (n,):
            raise DimensionMismatch(f"{name}: expected shape ({n},), got {getattr(params, name).shape}")
    for name in ("varrho", "sigma"):
        if getattr(params, name).shape != (n, n):
            raise DimensionMismatch(f"{name}: expected shape ({n}, {n}), got {getattr(params, name).shape}")
    if not (0.0 < params.gamma < 1.0):
        raise GammaOutOfRange(f"gamma: must lie strictly in (0, 1), got {params.gamma}")
    if np.any(params.alpha <= 0.0):
        bad = int(np.argmin(params.alpha))
        raise NonPositiveAlpha(f"alpha: entry {bad} is {params.alpha[bad]}, must be > 0")
    if params.T <= 0.0:
        raise ModelError(f"T: horizon must be positive, got {params.T}")

    svals = np.linalg.svd(params.sigma, compute_uv=False)
    if svals[0] == 0.0 or svals[-1] <= SIGMA_RANK_RTOL * svals[0]:
        raise SingularSigma(
            f"sigma: numerical rank below {n} (smallest singular value {svals[-1]:.3e})"
        )

    Q = params.sigma @ params.sigma.T
    Q = 0.5 * (Q + Q.T)
    Qinv = np.linalg.inv(Q)
    Qinv = 0.5 * (Qinv + Qinv.T)
    Adiag = np.diag(params.alpha)
    Gamma = Adiag @ Qinv @ Adiag
    Gamma = 0.5 * (Gamma + Gamma.T)
    row_sq = np.sum(params.sigma**2, axis=1)
    w = params.mu + row_sq / (2.0 * params.alpha)
    excess = params.alpha * params.mu - params.r * np.ones(n)

    # Q and Gamma must be SPD; Cholesky is the cheapest certificate.
    try:
        np.linalg.cholesky(Q)
        np.linalg.cholesky(Gamma)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by the SVD check
        raise SingularSigma(f"sigma: covariance not positive definite ({exc})") from exc

    return DerivedConstants(
        w=_frozen(w),
        Q=_frozen(Q),
        Qinv=_frozen(Qinv),
        Adiag=_frozen(Adiag),
        Gamma=_frozen(Gamma),
        excess=_frozen(excess),
    )


def field_H(params: ModelParams, consts: DerivedConstants, S) -> float:
    """Quadratic scalar field driving the transformed value equation.

    H(S) = r g/(1-g) + beta(S) + g (excess - diag(alpha) S)' Q^{-1} (excess - diag(alpha) S) / (2 (1-g)^2)

    with ``beta(S) = -(rho0 + S'rho + S'varrho S)/(1-g)`` and ``g = gamma``.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (params.n,):
        raise DimensionMismatch(f"S: expected shape ({params.n},), got {S.shape}")
    g = params.gamma
    beta = -(params.rho0 + S @ params.rho + S @ params.varrho @ S) / (1.0 - g)
    resid = consts.excess - params.alpha * S
    quad = resid @ consts.Qinv @ resid
    return params.r * g / (1.0 - g) + beta + g * quad / (2.0 * (1.0 - g) ** 2)
