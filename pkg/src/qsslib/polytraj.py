"""Polynomial trajectory arithmetic and real-root location for degrees <= 3.

Every state, quantized state and input in the event-driven solvers is a short
Taylor polynomial about a local origin.  This module provides evaluation,
re-centering (Taylor shift), and the robust smallest-positive-root machinery
that event scheduling is built on.  Everything here is pure and value-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "Trajectory",
    "poly_eval",
    "poly_shift",
    "poly_sub",
    "min_positive_root",
    "band_crossing",
    "band_crossing_time",
    "directed_zero_time",
    "BAND_SLACK",
    "ZERO_TOUCH_TOL",
    "DEGREE_DEMOTION_RTOL",
    "ROOT_RTOL",
]

# Relative accuracy of located roots.
ROOT_RTOL = 1e-12
# Leading coefficients below this fraction of the coefficient scale are
# treated as zero (demotes the effective degree; avoids noise roots).
DEGREE_DEMOTION_RTOL = 1e-14
# Band crossings are solved against band*(1 + BAND_SLACK) so that tangential
# touches of the band (Chebyshev equioscillation extrema) never schedule events.
BAND_SLACK = 1e-7
# |p| below this fraction of the band at a critical point of p counts as
# "q reaches x" for the plain-LIQSS update policy.
ZERO_TOUCH_TOL = 1e-6

_INF = math.inf


def poly_eval(coeffs, dt):
    """Evaluate sum(c[k] * dt**k) by Horner's rule."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * dt + c
    return acc


def poly_shift(coeffs, dt):
    """Re-express the polynomial about an origin shifted by +dt.

    Returns coefficients c' with sum(c'[k] tau**k) == sum(c[k] (tau+dt)**k).
    """
    out = list(coeffs)
    n = len(out)
    # Synthetic division (exact Taylor shift for any degree).
    for i in range(n - 1):
        for k in range(n - 2, i - 1, -1):
            out[k] += dt * out[k + 1]
    return out


def poly_sub(a, b):
    """a - b with implicit zero padding."""
    n = max(len(a), len(b))
    out = [0.0] * n
    for i, c in enumerate(a):
        out[i] += c
    for i, c in enumerate(b):
        out[i] -= c
    return out


@dataclass
class Trajectory:
    """Polynomial segment c0 + c1*tau + c2*tau**2 + c3*tau**3, tau = t - origin."""

    origin: float = 0.0
    coeffs: list[float] = field(default_factory=lambda: [0.0])

    def eval(self, t):
        return poly_eval(self.coeffs, t - self.origin)

    def advance(self, new_origin):
        """Same polynomial re-centered at new_origin."""
        return Trajectory(new_origin, poly_shift(self.coeffs, new_origin - self.origin))

    def derivative(self):
        return Trajectory(self.origin, [k * c for k, c in enumerate(self.coeffs)][1:] or [0.0])


def _effective_degree(coeffs):
    scale = max((abs(c) for c in coeffs), default=0.0)
    if scale == 0.0:
        return 0
    deg = len(coeffs) - 1
    while deg > 0 and abs(coeffs[deg]) < DEGREE_DEMOTION_RTOL * scale:
        deg -= 1
    return deg


def _quadratic_roots(c0, c1, c2):
    """Real roots of c2 x^2 + c1 x + c0, ascending.  Stable two-branch form."""
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return ()
    sq = math.sqrt(disc)
    if c1 >= 0.0:
        qq = -0.5 * (c1 + sq)
    else:
        qq = -0.5 * (c1 - sq)
    roots = []
    if qq != 0.0:
        roots.append(c0 / qq)
    elif c2 != 0.0:
        roots.append(0.0)
    if c2 != 0.0:
        roots.append(qq / c2)
    roots.sort()
    return tuple(roots)


def _refine_root(coeffs, lo, hi, flo):
    """Safeguarded Newton/bisection on a bracketing interval [lo, hi]."""
    c0, c1, c2, c3 = coeffs
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = c0 + x * (c1 + x * (c2 + x * c3))
        if f == 0.0:
            return x
        if (f < 0.0) == (flo < 0.0):
            lo = x
        else:
            hi = x
        d = c1 + x * (2.0 * c2 + 3.0 * x * c3)
        xn = x - f / d if d != 0.0 else lo
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= ROOT_RTOL * max(abs(xn), 1e-300):
            return xn
        x = xn
    return x


def min_positive_root(coeffs, horizon=None):
    """Smallest real root of the polynomial in (0, horizon], or None.

    Degree <= 2 is solved in closed form; degree 3 by monotone-interval
    bracketing (critical points of the derivative) plus safeguarded
    Newton/bisection.  A root exactly at 0 is excluded; the polynomial is
    deflated by t in that case so nearby genuine roots are still found.
    """
    hi_lim = _INF if horizon is None else horizon
    if hi_lim <= 0.0:
        return None
    c = list(coeffs[:4]) + [0.0] * (4 - len(coeffs))
    deg = _effective_degree(c)
    if c[0] == 0.0:
        # exact root at t=0 is not an event; deflate.
        c = [c[1], c[2], c[3], 0.0]
        deg = _effective_degree(c)
        if c[0] == 0.0 and deg == 0:
            return None

    if deg == 0:
        return None
    if deg == 1:
        t = -c[0] / c[1]
        return t if 0.0 < t <= hi_lim else None
    if deg == 2:
        best = None
        for t in _quadratic_roots(c[0], c[1], c[2]):
            if 0.0 < t <= hi_lim:
                best = t
                break
        return best

    # Cubic: scan the monotone pieces in ascending order.
    crit = [t for t in _quadratic_roots(c[1], 2.0 * c[2], 3.0 * c[3]) if t > 0.0]
    cauchy = 1.0 + max(abs(c[0]), abs(c[1]), abs(c[2])) / abs(c[3])
    hi_scan = min(hi_lim, cauchy)
    edges = [0.0] + [t for t in crit if t < hi_scan] + [hi_scan]
    cc = (c[0], c[1], c[2], c[3])
    f_lo = c[0]
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        f_hi = poly_eval(cc, hi)
        if f_lo == 0.0 and lo > 0.0:
            return lo if lo <= hi_lim else None
        if (f_lo < 0.0) != (f_hi < 0.0) or f_hi == 0.0:
            root = hi if f_hi == 0.0 else _refine_root(cc, lo, hi, f_lo)
            return root if 0.0 < root <= hi_lim else None
        f_lo = f_hi
    return None


def band_crossing(p, band, include_zero_crossing=False, horizon=None,
                  slack=BAND_SLACK):
    """Next time the difference polynomial p leaves the +-band.

    p holds the coefficients of x - q about the current time (tau = 0).
    Returns the smallest positive time with |p(t)| = band*(1+slack), 0.0 when
    the band is already violated at tau=0, or None when no crossing exists
    within the horizon.  With include_zero_crossing, times where p reaches
    zero (transversally, or tangentially to within ZERO_TOUCH_TOL*band) also
    count; this implements the plain-LIQSS update policy.
    """
    b = band * (1.0 + slack)
    p = list(p[:4]) + [0.0] * (4 - len(p))
    if abs(p[0]) >= b:
        return 0.0
    cand = min_positive_root([p[0] - b, p[1], p[2], p[3]], horizon)
    t2 = min_positive_root([p[0] + b, p[1], p[2], p[3]], horizon)
    if t2 is not None and (cand is None or t2 < cand):
        cand = t2
    if include_zero_crossing:
        t3 = min_positive_root(p, horizon)
        if t3 is not None and (cand is None or t3 < cand):
            cand = t3
        # Tangential zero touches (even multiplicity) have no sign change:
        # check the critical points of p.
        tol = ZERO_TOUCH_TOL * band
        for tc in _quadratic_roots(p[1], 2.0 * p[2], 3.0 * p[3]):
            if 0.0 < tc and (horizon is None or tc <= horizon) and (cand is None or tc < cand):
                if abs(poly_eval(p, tc)) <= tol:
                    cand = tc
    return cand


def band_crossing_time(x: Trajectory, q: Trajectory, band,
                       include_zero_crossing=False, horizon=None):
    """Absolute time at which |x(t) - q(t)| first reaches the band.

    x and q must share a common origin.  Returns None when x and q stay
    within the band over the horizon.
    """
    if x.origin != q.origin:
        raise ValueError("x and q must share a common origin")
    rel = band_crossing(poly_sub(x.coeffs, q.coeffs), band,
                        include_zero_crossing, horizon)
    return None if rel is None else x.origin + rel


def directed_zero_time(coeffs, direction=0, horizon=None):
    """Smallest positive root of the guard polynomial with matching slope.

    direction +1 keeps rising crossings only, -1 falling, 0 any.  Used for
    zero-crossing (discontinuity) scheduling where e.g. a spike fires only
    when the membrane potential crosses the threshold upward.
    """
    c = list(coeffs[:4]) + [0.0] * (4 - len(coeffs))
    lo = 0.0
    guard = 64  # a degree-3 polynomial has at most 3 roots
    while guard:
        guard -= 1
        t = min_positive_root(poly_shift(c, lo), None if horizon is None else horizon - lo)
        if t is None:
            return None
        t_abs = lo + t
        if direction == 0:
            return t_abs
        slope = poly_eval([c[1], 2.0 * c[2], 3.0 * c[3]], t_abs)
        if slope * direction > 0.0:
            return t_abs
        # skip past this root and keep looking
        lo = t_abs + max(abs(t_abs), 1.0) * 1e-12
    return None
