"""Quadrature helpers shared by the benchmark and reconstruction layers.

All cumulative rules integrate from the right end of a uniform grid, i.e.
``out[j]`` approximates the integral from node j to the last node.  Inputs may
carry trailing axes; integration runs along axis 0.
"""

from __future__ import annotations

import numpy as np


def composite_simpson(fun, a: float, b: float, panels: int) -> float:
    """Composite Simpson rule for a callable on [a, b] with an even panel count."""
    if panels < 2 or panels % 2:
        raise ValueError(f"panels must be even and >= 2, got {panels}")
    x = np.linspace(a, b, panels + 1)
    y = fun(x)
    h = (b - a) / panels
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def _reverse_cumsum(inc: np.ndarray) -> np.ndarray:
    out = np.zeros((inc.shape[0] + 1,) + inc.shape[1:], dtype=float)
    out[:-1] = np.cumsum(inc[::-1], axis=0)[::-1]
    return out


def right_cumulative_trapezoid(y: np.ndarray, dx: float) -> np.ndarray:
    """Trapezoid rule; second order."""
    inc = 0.5 * dx * (y[:-1] + y[1:])
    return _reverse_cumsum(inc)


def right_cumulative_simpson_mid(y_nodes: np.ndarray, y_mids: np.ndarray, dx: float) -> np.ndarray:
    """Per interval Simpson using midpoint samples; fourth order."""
    inc = dx / 6.0 * (y_nodes[:-1] + 4.0 * y_mids + y_nodes[1:])
    return _reverse_cumsum(inc)


def right_cumulative_quadratic(y: np.ndarray, dx: float) -> np.ndarray:
    """Per interval rule from the quadratic through three consecutive nodes.

    Interval [j, j+1] integrates the parabola through nodes j, j+1, j+2
    (shifted stencil on the final interval).  Third order globally, needs
    node values only.  Falls back to the trapezoid when fewer than three
    nodes are available.
    """
    m = y.shape[0] - 1
    if m < 2:
        return right_cumulative_trapezoid(y, dx)
    inc = np.empty_like(y[:-1])
    inc[:-1] = dx / 12.0 * (5.0 * y[:-2] + 8.0 * y[1:-1] - y[2:])
    inc[-1] = dx / 12.0 * (-y[-3] + 8.0 * y[-2] + 5.0 * y[-1])
    return _reverse_cumsum(inc)
