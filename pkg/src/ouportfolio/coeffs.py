"""Runge-Kutta integration of the linear coefficient ODEs coupled to g(t).

Given the Riccati grid, the linear and scalar coefficients of the value
ansatz solve the terminal value problems

    f'(t)  = F(g, f)  = A f + g B f + g C + D,          f(T)  = 0,
    f0'(t) = F0(g, f) = lin0' f - f' Q f / 2 - tr(g Q) + const0,   f0(T) = 0,

with A = diag(alpha)/(1-gamma), B = -2 Q,
C = -2 diag(alpha) w - 2 gamma (diag(alpha) mu - r e)/(1-gamma),
D = gamma diag(alpha) Q^{-1} (diag(alpha) mu - r e)/(1-gamma)^2 + rho/(1-gamma),
lin0 = -(diag(alpha) w + gamma (diag(alpha) mu - r e)/(1-gamma)) and
const0 = -gamma excess' Q^{-1} excess / (2 (1-gamma)^2) - (r gamma - rho0)/(1-gamma).

Explicit schemes step the reversed (time to go) system; stage values of g at
fractional abscissae come from the half-step nodes of the Riccati grid, never
from interpolation.  The scalar equation is a pure quadrature (F0 does not
depend on f0); its stages need f at half nodes, which are estimated with a
one-shot explicit trapezoid half step anchored at the current main-grid value
so both global orders survive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import DerivedConstants, ModelParams
from .riccati import RiccatiGrid, StepTooLarge

_ABSCISSA_TOL = 1e-12


class MissingStageValue(RuntimeError):
    """The Riccati grid lacks a value at a required stage abscissa."""


@dataclass(frozen=True)
class RkTableau:
    """Explicit Runge-Kutta tableau (weights d, abscissae l, stage matrix m)."""

    order: int
    l: tuple
    d: tuple
    m: tuple
    name: str

    def __post_init__(self):
        if abs(sum(self.d) - 1.0) > 1e-13:
            raise ValueError(f"{self.name}: weights must sum to 1")
        for i, (li, row) in enumerate(zip(self.l, self.m)):
            if abs(sum(row) - li) > 1e-13:
                raise ValueError(f"{self.name}: stage {i} row sum must equal abscissa {li}")
        if len(self.l) != len(self.d) or len(self.l) != len(self.m):
            raise ValueError(f"{self.name}: inconsistent stage counts")


RK2_MIDPOINT = RkTableau(order=2, l=(0.0, 0.5), d=(0.0, 1.0), m=((), (0.5,)), name="midpoint")
RK3_KUTTA = RkTableau(order=3, l=(0.0, 0.5, 1.0), d=(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
                      m=((), (0.5,), (-1.0, 2.0)), name="kutta3")

TABLEAUS = {2: RK2_MIDPOINT, 3: RK3_KUTTA}


@dataclass(frozen=True)
class CoeffRhs:
    """Precomputed constant blocks of F and F0."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    lin0: np.ndarray
    const0: float

    @classmethod
    def from_model(cls, params: ModelParams, consts: DerivedConstants) -> "CoeffRhs":
        g = params.gamma
        A = consts.Adiag / (1.0 - g)
        B = -2.0 * consts.Q
        C = -2.0 * params.alpha * consts.w - 2.0 * g * consts.excess / (1.0 - g)
        D = g * consts.Adiag @ consts.Qinv @ consts.excess / (1.0 - g) ** 2
        D = D + params.rho / (1.0 - g)
        lin0 = -(params.alpha * consts.w + g * consts.excess / (1.0 - g))
        const0 = -g * consts.excess @ consts.Qinv @ consts.excess / (2.0 * (1.0 - g) ** 2)
        const0 -= (params.r * g - params.rho0) / (1.0 - g)
        return cls(A=A, B=B, C=C, D=D, Q=consts.Q, lin0=lin0, const0=float(const0))


def rhs_F(co: CoeffRhs, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Right-hand side of the linear coefficient equation."""
    return co.A @ f + g @ (co.B @ f) + g @ co.C + co.D


def rhs_F0(co: CoeffRhs, g: np.ndarray, f: np.ndarray) -> float:
    """Right-hand side of the scalar coefficient equation (independent of f0)."""
    return float(co.lin0 @ f - 0.5 * f @ co.Q @ f - np.einsum("ij,ji->", g, co.Q) + co.const0)


@dataclass
class CoefficientPath:
    """Time-gridded solution triple (g, f, f0) with exact terminal zeros."""

    T: float
    h: float
    K: int
    g_values: np.ndarray               # (K+1, n, n)
    g_half: np.ndarray | None          # (K, n, n) or None
    f_values: np.ndarray               # (K+1, n)
    f0_values: np.ndarray              # (K+1,)
    scheme: str                        # "expeuler-rk2" or "erow3-rk3"

    @property
    def n(self) -> int:
        return self.f_values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.K + 1)

    def to_csv(self, path) -> None:
        n = self.n
        header = ["t"] + [f"f{i + 1}" for i in range(n)] + ["f0"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(self.K + 1):
                row = [repr(float(k * self.h))]
                row += [repr(float(v)) for v in self.f_values[k]]
                row.append(repr(float(self.f0_values[k])))
                fh.write(",".join(row) + "\n")

    def save(self, path) -> None:
        """Binary round-trip format (bit exact)."""
        np.savez(path, T=self.T, h=self.h, K=self.K, g_values=self.g_values,
                 g_half=self.g_half if self.g_half is not None else np.empty(0),
                 has_half=self.g_half is not None,
                 f_values=self.f_values, f0_values=self.f0_values, scheme=self.scheme)

    @classmethod
    def load(cls, path) -> "CoefficientPath":
        with np.load(path, allow_pickle=False) as data:
            has_half = bool(data["has_half"])
            return cls(
                T=float(data["T"]), h=float(data["h"]), K=int(data["K"]),
                g_values=data["g_values"],
                g_half=data["g_half"] if has_half else None,
                f_values=data["f_values"], f0_values=data["f0_values"],
                scheme=str(data["scheme"]),
            )


def lipschitz_cap(co: CoeffRhs, riccati: RiccatiGrid) -> float:
    """Largest step allowed by the f-Lipschitz constant: 1 / (2 max_k |A + g_k B|)."""
    lf = max(np.linalg.norm(co.A + g @ co.B, 2) for g in riccati.values)
    return 0.5 / lf if lf > 0 else np.inf


def solve_coefficients(params: ModelParams, consts: DerivedConstants,
                       riccati: RiccatiGrid, tableau: RkTableau) -> CoefficientPath:
    """Integrate f and f0 backward on the Riccati grid with the given tableau."""
    co = CoeffRhs.from_model(params, consts)
    K, h = riccati.K, riccati.h
    n = riccati.n
    g = riccati.values
    gh = riccati.half_values

    needs_half = any(abs(li - 0.5) <= _ABSCISSA_TOL for li in tableau.l)
    for li in tableau.l:
        if min(abs(li), abs(li - 0.5), abs(li - 1.0)) > _ABSCISSA_TOL:
            raise MissingStageValue(f"no grid values at stage abscissa {li}")
    if needs_half and gh is None:
        raise MissingStageValue("tableau needs half-step nodes; solve the Riccati grid "
                                "with need_half_steps=True")

    cap = lipschitz_cap(co, riccati)
    if h > cap:
        raise StepTooLarge(f"step {h:g} exceeds the Lipschitz stability cap {cap:g}; "
                           f"increase the step count")

    # cache the g-dependent pieces per node: F(g, f) = (A + g B) f + (g C + D)
    # and the trace term of F0
    lin_nodes = co.A + g @ co.B
    aff_nodes = g @ co.C + co.D
    tr_nodes = np.einsum("kij,ji->k", g, co.Q)
    if gh is not None:
        lin_half = co.A + gh @ co.B
        aff_half = gh @ co.C + co.D
        tr_half = np.einsum("kij,ji->k", gh, co.Q)

    def stage_data(k, li):
        if abs(li) <= _ABSCISSA_TOL:
            return lin_nodes[k], aff_nodes[k], tr_nodes[k]
        if abs(li - 0.5) <= _ABSCISSA_TOL:
            return lin_half[k - 1], aff_half[k - 1], tr_half[k - 1]
        return lin_nodes[k - 1], aff_nodes[k - 1], tr_nodes[k - 1]

    f = np.zeros((K + 1, n))
    f0 = np.zeros(K + 1)
    for k in range(K, 0, -1):
        ys = []
        for li, row in zip(tableau.l, tableau.m):
            stage_f = f[k].copy()
            for mij, yj in zip(row, ys):
                stage_f += h * mij * yj
            lin, aff, _ = stage_data(k, li)
            ys.append(-(lin @ stage_f + aff))
        f[k - 1] = f[k] + h * sum(di * yi for di, yi in zip(tableau.d, ys))

        if needs_half:
            # one-shot trapezoid half step toward t_{k-1/2}; local third order
            y1 = -(lin_nodes[k] @ f[k] + aff_nodes[k])
            y2 = -(lin_half[k - 1] @ (f[k] + 0.5 * h * y1) + aff_half[k - 1])
            f_half = f[k] + 0.25 * h * (y1 + y2)

        def f_at(li):
            if abs(li) <= _ABSCISSA_TOL:
                return f[k]
            if abs(li - 0.5) <= _ABSCISSA_TOL:
                return f_half
            return f[k - 1]

        zs = []
        for li in tableau.l:
            _, _, trg = stage_data(k, li)
            fv = f_at(li)
            zs.append(-(co.lin0 @ fv - 0.5 * fv @ co.Q @ fv - trg + co.const0))
        f0[k - 1] = f0[k] + h * sum(di * zi for di, zi in zip(tableau.d, zs))

    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(f0))):
        raise StepTooLarge("coefficient solve produced non-finite values")

    scheme = f"{riccati.scheme}-rk{tableau.order}"
    return CoefficientPath(T=riccati.T, h=h, K=K, g_values=g, g_half=gh,
                           f_values=f, f0_values=f0, scheme=scheme)
