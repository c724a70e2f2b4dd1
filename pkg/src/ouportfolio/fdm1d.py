"""Single-asset finite difference reference for the transformed value equation.

Solves phi_t + a(S) phi_S + H(S) phi + q phi_SS / 2 + 1 = 0 backward from
phi(T, S) = 1 on a truncated interval, with boundary columns pinned to the
quadrature benchmark (exact boundary conditions).  Space uses second-order
central differences (optional upwinding for strong drift); time uses implicit
Euler, which is unconditionally stable, so the sweep reduces to one
tridiagonal solve per level.

This is the grid-based method the ODE route is measured against: same
accuracy target, but it must resolve the state axis as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .benchmark import DecoupledParams, phi_reference_1d
from .market import DerivedConstants, DimensionMismatch, ModelParams, field_H


class SingularSystem(RuntimeError):
    """The implicit tridiagonal solve failed."""


@dataclass
class FdmGrid:
    """Solution surface phi[time, space] on the rectangle [0, T] x [s_lo, s_hi]."""

    s_lo: float
    s_hi: float
    n_space: int
    n_time: int
    times: np.ndarray
    s: np.ndarray
    phi: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t," + ",".join(repr(float(x)) for x in self.s) + "\n")
            for j, t in enumerate(self.times):
                fh.write(repr(float(t)) + "," +
                         ",".join(repr(float(v)) for v in self.phi[j]) + "\n")


def _sweep(times: np.ndarray, s: np.ndarray, drift: np.ndarray, hfield: np.ndarray,
           q: float, lo: np.ndarray, hi: np.ndarray, upwind: bool) -> np.ndarray:
    """Backward implicit sweep; returns phi[time, space]."""
    n_time = times.size - 1
    n_interior = s.size - 2
    ds = s[1] - s[0]
    dt = times[1] - times[0]

    diffusion = 0.5 * q / ds**2
    a_int = drift[1:-1]
    if upwind:
        up = np.clip(a_int, 0.0, None) / ds
        dn = np.clip(-a_int, 0.0, None) / ds
        c_sub = diffusion + dn
        c_diag = -2.0 * diffusion - up - dn + hfield[1:-1]
        c_sup = diffusion + up
    else:
        c_sub = diffusion - a_int / (2.0 * ds)
        c_diag = -2.0 * diffusion + hfield[1:-1]
        c_sup = diffusion + a_int / (2.0 * ds)

    # banded (I - dt L) for solve_banded with (1, 1) bands
    ab = np.zeros((3, n_interior))
    ab[0, 1:] = -dt * c_sup[:-1]
    ab[1, :] = 1.0 - dt * c_diag
    ab[2, :-1] = -dt * c_sub[1:]

    phi = np.empty((n_time + 1, s.size))
    phi[n_time] = 1.0
    phi[n_time, 0] = lo[n_time]
    phi[n_time, -1] = hi[n_time]
    for m in range(n_time - 1, -1, -1):
        rhs = phi[m + 1, 1:-1] + dt
        rhs = rhs.copy()
        rhs[0] += dt * c_sub[0] * lo[m]
        rhs[-1] += dt * c_sup[-1] * hi[m]
        try:
            interior = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"implicit solve failed at time level {m}: {exc}") from exc
        if not np.all(np.isfinite(interior)):
            raise SingularSystem(f"implicit solve produced non-finite values at level {m}")
        phi[m, 0] = lo[m]
        phi[m, 1:-1] = interior
        phi[m, -1] = hi[m]
    return phi


def solve_fdm_1d(params: ModelParams, consts: DerivedConstants, s_lo: float, s_hi: float,
                 n_space: int, n_time: int, upwind: bool = False,
                 boundary_refine: int = 10) -> FdmGrid:
    """Integration-difference solve with oracle boundary values."""
    if params.n != 1:
        raise DimensionMismatch("the finite difference reference is single-asset only")
    if n_space < 3 or n_time < 1:
        raise ValueError("need n_space >= 3 and n_time >= 1")
    dp = DecoupledParams.from_model(params, consts)
    times = np.linspace(0.0, params.T, n_time + 1)
    s = np.linspace(s_lo, s_hi, n_space + 1)
    bvals = phi_reference_1d(dp, times, np.array([s_lo, s_hi]), refine=boundary_refine)
    drift = params.alpha[0] * (consts.w[0] - s) + params.gamma * (
        params.alpha[0] * (params.mu[0] - s) - params.r) / (1.0 - params.gamma)
    hfield = np.array([field_H(params, consts, np.array([x])) for x in s])
    phi = _sweep(times, s, drift, hfield, float(consts.Q[0, 0]),
                 bvals[:, 0], bvals[:, 1], upwind)
    return FdmGrid(s_lo=s_lo, s_hi=s_hi, n_space=n_space, n_time=n_time,
                   times=times, s=s, phi=phi)
