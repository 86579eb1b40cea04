"""Signal activity functionals and the step-count lower bounds they imply.

The n-th order activity of a signal over a window is the integral of
|x^(n)(t)/n!|^(1/n); divided by quantum^(1/n) it lower-bounds the number of
segments any degree-(n-1) piecewise approximation staying within the quantum
needs (classic bound), and an extra factor 2^((2n-1)/n) applies to schemes
whose segments need not start or end on the signal (general bound).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "activity_n",
    "min_steps_classic",
    "min_steps_general",
    "spline_derivative",
    "write_activity_report",
]

_FACTORIALS = (1.0, 1.0, 2.0, 6.0)


def activity_n(derivative_n, n, t0, tf, panels=10_000):
    """Composite-Simpson integral of |x^(n)(t)/n!|^(1/n) over [t0, tf].

    derivative_n must accept a numpy array of times and return the n-th
    derivative of the signal at them.  panels is the number of Simpson
    panels (two subintervals each).
    """
    if n not in (1, 2, 3):
        raise ValueError("activity order must be 1, 2 or 3")
    if tf <= t0:
        raise ValueError("tf must exceed t0")
    m = 2 * int(panels)
    t = np.linspace(t0, tf, m + 1)
    g = np.abs(np.asarray(derivative_n(t), dtype=float) / _FACTORIALS[n]) ** (1.0 / n)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((tf - t0) / (3.0 * m) * np.dot(w, g))


def min_steps_classic(activity, quantum, n):
    """Lower bound for segments that start or end on the signal (per variable)."""
    if quantum <= 0.0:
        raise ValueError("quantum must be positive")
    return activity / quantum ** (1.0 / n)


def min_steps_general(activity, quantum, n):
    """Lower bound for arbitrary quantization-based schemes (per variable)."""
    return min_steps_classic(activity, quantum, n) / 2.0 ** ((2.0 * n - 1.0) / n)


def spline_derivative(times, values, n):
    """n-th derivative of densely sampled data via a cubic interpolating spline.

    Used when no analytic derivative of the reference trajectory is at hand.
    """
    from scipy.interpolate import CubicSpline

    spl = CubicSpline(np.asarray(times, dtype=float),
                      np.asarray(values, dtype=float)).derivative(n)
    return lambda t: spl(t)


def write_activity_report(fh, rows):
    """CSV rows (var, order, activity, bound_general, bound_classic)."""
    fh.write("var,order,activity,bound_general,bound_classic\n")
    for var, order, act, bg, bc in rows:
        fh.write(f"{var},{order},{act:.17g},{bg:.17g},{bc:.17g}\n")
