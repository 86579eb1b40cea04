"""Quantized-state update rules: explicit QSS, LIQSS/eLIQSS and CheQSS, orders 1-3.

Each rule picks the next quantized-state segment q(t) (degree order-1) for one
variable from its current value, the scalar linearization dx/dt = a*q + u(t),
and the quantum.  The difference polynomial p(t) = x(t) - q(t) is the design
handle: LIQSS drives p to zero at a solved step scale t_m, CheQSS shapes p as
a scaled shifted Chebyshev polynomial, which maximizes t_m for a given band.
A shared equilibrium branch offsets q by a constant so that x and q run
parallel whenever the linearization admits it.

`quantize_coeffs` is the allocation-free kernel the engine calls per event;
the dataclass API wraps it.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .polytraj import Trajectory, min_positive_root

__all__ = [
    "QuantizerContext",
    "QuantizedSegment",
    "NoPositiveRoot",
    "compute_r",
    "equilibrium_branch",
    "quantize_liqss",
    "quantize_cheqss",
    "quantize_qss",
    "quantize",
    "quantize_coeffs",
    "chebyshev_T",
    "POLICIES",
]

POLICIES = ("qss", "liqss", "eliqss", "cheqss")

# |a|**order * quantum below this fraction of |r_n| means the linear feedback
# cannot matter; treat a as zero (its zero-a limit is the correct branch).
_A_NEGLIGIBLE_RTOL = 1e-12


class NoPositiveRoot(RuntimeError):
    """The step-scale equation had no positive root.

    The sign conventions make this impossible for valid inputs; raised only to
    surface an internal inconsistency instead of corrupting the simulation.
    """


def _sign(v):
    # sign(0) := +1 so the update formulas are total.
    return -1.0 if v < 0.0 else 1.0


def chebyshev_T(n, z):
    """Chebyshev polynomials T1..T3 of the first kind."""
    if n == 1:
        return z
    if n == 2:
        return 2.0 * z * z - 1.0
    if n == 3:
        return (4.0 * z * z - 3.0) * z
    raise ValueError(f"unsupported Chebyshev degree {n}")


def compute_r(order, a, x0, u):
    """Auxiliary coefficient r_n of the linearization (u holds derivative values)."""
    if order == 1:
        return a * x0 + u[0]
    if order == 2:
        return a * (a * x0 + u[0]) + u[1]
    if order == 3:
        return a * (a * (a * x0 + u[0]) + u[1]) + u[2]
    raise ValueError(f"order must be 1..3, got {order}")


def _step_scale(order, a, ratio, cheb):
    """Positive root of the step-scale polynomial; ratio = r_n/p0.

    LIQSS:  order 1: (ratio - a) t + 1 = 0
            order 2: (ratio - a^2) t^2 + 2 a t - 2 = 0
            order 3: (ratio - a^3) t^3 + 3 a^2 t^2 - 6 a t + 6 = 0
    CheQSS: order 1: (ratio - a) t + 2 = 0
            order 2: (ratio - a^2) t^2 + 8 a t - 16 = 0
            order 3: (ratio - a^3) t^3 + 18 a^2 t^2 - 96 a t + 192 = 0
    The sign conventions (ratio <= -|a| for odd orders, >= a^2 for order 2,
    strict outside equilibrium) guarantee a positive root.
    """
    if order == 1:
        denom = a - ratio
        t = (2.0 if cheb else 1.0) / denom if denom > 0.0 else None
    elif order == 2:
        if cheb:
            t = min_positive_root((-16.0, 8.0 * a, ratio - a * a))
        else:
            t = min_positive_root((-2.0, 2.0 * a, ratio - a * a))
    else:
        a2 = a * a
        if cheb:
            t = min_positive_root((192.0, -96.0 * a, 18.0 * a2, ratio - a2 * a))
        else:
            t = min_positive_root((6.0, -6.0 * a, 3.0 * a2, ratio - a2 * a))
    if t is None or t <= 0.0:
        raise NoPositiveRoot(
            f"no positive step scale for order={order}, a={a}, ratio={ratio}")
    return t


def quantize_coeffs(order, policy, x, a, u0, u1, u2, quantum):
    """One quantization decision on raw coefficients.

    x: state Taylor coefficients (only x[0] matters except for the qss
    truncation and the a=0 equilibrium).  u0, u1, u2: derivative values of
    the linearization input.  Returns (q0, q1, q2, p0, t_m, equilibrium)
    with unused high-order q coefficients zero.
    """
    if policy == "qss":
        q1 = x[1] if order >= 2 else 0.0
        q2 = x[2] if order >= 3 else 0.0
        return (x[0], q1, q2, 0.0, None, False)

    x0 = x[0]
    if order == 1:
        r_n = a * x0 + u0
    elif order == 2:
        r_n = a * (a * x0 + u0) + u1
    else:
        r_n = a * (a * (a * x0 + u0) + u1) + u2

    # equilibrium branch: constant offset c keeps q parallel to x
    an = a ** order
    if a != 0.0 and abs(an) * quantum > _A_NEGLIGIBLE_RTOL * abs(r_n):
        if abs(r_n) <= abs(an) * quantum:
            c = r_n / an
            q0 = x0 - c
            if order == 1:
                return (q0, 0.0, 0.0, c, None, True)
            q1 = a * q0 + u0
            if order == 2:
                return (q0, q1, 0.0, c, None, True)
            return (q0, q1, 0.5 * (a * q1 + u1), c, None, True)
    elif r_n == 0.0:
        q1 = x[1] if order >= 2 else 0.0
        q2 = x[2] if order >= 3 else 0.0
        return (x0, q1, q2, 0.0, None, True)

    cheb = policy == "cheqss"
    p0 = _sign(r_n) * quantum if order == 2 else -_sign(r_n) * quantum
    t_m = _step_scale(order, a, r_n / p0, cheb)
    return _build_noneq(order, a, x0, u0, u1, p0, t_m, cheb)


@dataclass
class QuantizerContext:
    """Inputs to one quantization decision.

    x: Taylor coefficients of the state about the decision time (value,
    slope, half-curvature, ...).  u: derivative values (u, du/dt, d2u/dt2) of
    the linearization input, at least `order` entries.  a: diagonal Jacobian.
    """

    order: int
    x: tuple
    a: float
    u: tuple
    quantum: float
    policy: str = "cheqss"

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1..3, got {self.order}")
        if self.quantum <= 0.0:
            raise ValueError("quantum must be positive")
        if len(self.u) < self.order:
            raise ValueError("u must carry at least `order` derivative values")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")

    def _u3(self):
        u = tuple(self.u) + (0.0, 0.0)
        return u[0], u[1], u[2]

    def _x3(self):
        return tuple(self.x) + (0.0,) * max(0, 3 - len(self.x))


@dataclass
class QuantizedSegment:
    """One quantized-state segment: q (degree <= order-1), its p(0) and step scale."""

    q: Trajectory
    p0: float
    t_m: Optional[float]
    equilibrium: bool


def _segment(order, raw, origin=0.0):
    q0, q1, q2, p0, t_m, eq = raw
    coeffs = [q0, q1, q2][:order]
    return QuantizedSegment(Trajectory(origin, coeffs), p0, t_m, eq)


def equilibrium_branch(order, a, r_n, quantum, x, u=(0.0, 0.0, 0.0), origin=0.0):
    """Parallel-trajectories branch: q = x - r_n/a^n when |r_n| <= |a|^n quantum.

    x holds the state's Taylor coefficients, u the input's derivative values
    (the recursion dq/dt = a q + u needs them).  Returns None when no constant
    offset keeps |x - q| inside the quantum.
    """
    an = a ** order
    if a != 0.0 and abs(an) * quantum > _A_NEGLIGIBLE_RTOL * abs(r_n):
        if abs(r_n) > abs(an) * quantum:
            return None
        c = r_n / an
        q0 = x[0] - c
        if order == 1:
            q = [q0]
        elif order == 2:
            q = [q0, a * q0 + u[0]]
        else:
            q1 = a * q0 + u[0]
            q = [q0, q1, 0.5 * (a * q1 + u[1])]
        return QuantizedSegment(Trajectory(origin, q), c, None, True)
    if r_n == 0.0:
        q = list(x[:order]) + [0.0] * max(0, order - len(x))
        return QuantizedSegment(Trajectory(origin, q), 0.0, None, True)
    return None


def quantize_liqss(ctx: QuantizerContext) -> QuantizedSegment:
    """LIQSS/eLIQSS non-equilibrium update (call after equilibrium_branch is None)."""
    u0, u1, u2 = ctx._u3()
    x = ctx._x3()
    r_n = compute_r(ctx.order, ctx.a, x[0], (u0, u1, u2))
    p0 = _sign(r_n) * ctx.quantum if ctx.order == 2 else -_sign(r_n) * ctx.quantum
    t_m = _step_scale(ctx.order, ctx.a, r_n / p0, cheb=False)
    return _segment(ctx.order, _build_noneq(ctx.order, ctx.a, x[0], u0, u1, p0, t_m, False))


def quantize_cheqss(ctx: QuantizerContext) -> QuantizedSegment:
    """CheQSS non-equilibrium update; order 1 coincides with LIQSS1."""
    u0, u1, u2 = ctx._u3()
    x = ctx._x3()
    r_n = compute_r(ctx.order, ctx.a, x[0], (u0, u1, u2))
    p0 = _sign(r_n) * ctx.quantum if ctx.order == 2 else -_sign(r_n) * ctx.quantum
    t_m = _step_scale(ctx.order, ctx.a, r_n / p0, cheb=True)
    return _segment(ctx.order, _build_noneq(ctx.order, ctx.a, x[0], u0, u1, p0, t_m, True))


def _build_noneq(order, a, x0, u0, u1, p0, t_m, cheb):
    # dq/dt, d2q/dt2 from q' = a q + u - p' with the method's p shape:
    # LIQSS p = p0 (1 - t/t_m)^order, CheQSS p = -+quantum T_n((2t - t_m)/t_m).
    q0 = x0 - p0
    if order == 1:
        return (q0, 0.0, 0.0, p0, t_m, False)
    if order == 2:
        k1 = 8.0 if cheb else 2.0
        return (q0, a * q0 + u0 + k1 * p0 / t_m, 0.0, p0, t_m, False)
    k1, k2 = (18.0, 96.0) if cheb else (3.0, 6.0)
    q1 = a * q0 + u0 + k1 * p0 / t_m
    q2 = a * q1 + u1 - k2 * p0 / (t_m * t_m)
    return (q0, q1, 0.5 * q2, p0, t_m, False)


def quantize_qss(ctx: QuantizerContext) -> QuantizedSegment:
    """Explicit QSS: q is the state polynomial truncated to degree order-1."""
    return _segment(ctx.order, quantize_coeffs(ctx.order, "qss", ctx._x3(),
                                               ctx.a, *ctx._u3(), ctx.quantum))


def quantize(ctx: QuantizerContext) -> QuantizedSegment:
    """Full quantization decision: equilibrium branch first, then the method rule."""
    u0, u1, u2 = ctx._u3()
    raw = quantize_coeffs(ctx.order, ctx.policy, ctx._x3(), ctx.a,
                          u0, u1, u2, ctx.quantum)
    return _segment(ctx.order, raw)
