"""Adaptive Dormand-Prince 5(4) baseline with dense output and event location.

Classic discrete-time reference for cross-validating the quantized-state
engine: embedded error control, FSAL, 4th-order dense output used to bisect
zero crossings, and restart-at-event semantics for discontinuities.  Works on
the same ModelSpec instances through their vectorized right-hand side.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass
from heapq import heappush, heappop

import numpy as np

from .engine import SimStats

__all__ = [
    "RkController",
    "NonFiniteState",
    "StepUnderflow",
    "dopri_step",
    "dense_eval",
    "dopri_run",
]


class NonFiniteState(RuntimeError):
    pass


class StepUnderflow(RuntimeError):
    pass


# Dormand-Prince 5(4) tableau (FSAL; seventh stage row equals b5)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# b5 - b4: weights of the embedded error estimate
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense-output weights (Hairer's contd5 coefficients)
_D = (-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
      -10690763975 / 1880347072, 701980252875 / 199316789632,
      -1453857185 / 822651844, 69997945 / 29380423)


@dataclass
class RkController:
    """Embedded-pair step-size control: accept when the weighted error <= 1."""

    rtol: float = 1e-6
    atol: float = 1e-9          # scalar or per-variable array
    safety: float = 0.9
    fac_min: float = 0.2
    fac_max: float = 10.0

    def error_norm(self, err, x0, x1):
        scale = self.atol + self.rtol * np.maximum(np.abs(x0), np.abs(x1))
        return float(np.max(np.abs(err) / scale))

    def factor(self, err_norm):
        if err_norm == 0.0:
            return self.fac_max
        return min(self.fac_max, max(self.fac_min,
                                     self.safety * err_norm ** -0.2))


def dopri_step(f, t, x, h, k1=None):
    """One 7-stage DOPRI 5(4) step.

    Returns (x5, err, k) where err is the embedded 4th-order error estimate
    and k the list of stage derivatives; k[6] = f(t+h, x5) is reusable as the
    next step's k1 (FSAL).
    """
    k = [None] * 7
    k[0] = f(t, x) if k1 is None else k1
    for s in range(1, 7):
        inc = _A[s][0] * k[0]
        for j in range(1, s):
            if _A[s][j] != 0.0:
                inc = inc + _A[s][j] * k[j]
        k[s] = f(t + _C[s] * h, x + h * inc)
    x5 = x + h * (_B5[0] * k[0] + _B5[2] * k[2] + _B5[3] * k[3]
                  + _B5[4] * k[4] + _B5[5] * k[5])
    err = h * (_E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3]
               + _E[4] * k[4] + _E[5] * k[5] + _E[6] * k[6])
    if not np.all(np.isfinite(x5)):
        raise NonFiniteState(f"non-finite state after step at t={t:g}")
    return x5, err, k


def dense_factors(x0, x5, k, h):
    """Interpolation coefficients for the 4th-order continuous extension."""
    ydiff = x5 - x0
    bspl = h * k[0] - ydiff
    r5 = h * (_D[0] * k[0] + _D[2] * k[2] + _D[3] * k[3]
              + _D[4] * k[4] + _D[5] * k[5] + _D[6] * k[6])
    return (x0, ydiff, bspl, ydiff - h * k[6] - bspl, r5)


def dense_eval(rcont, theta):
    """State at t0 + theta*h from the stored interpolation coefficients."""
    r1, r2, r3, r4, r5 = rcont
    th1 = 1.0 - theta
    return r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))


def _initial_step(f, t0, x0, f0, ctrl, t_end):
    scale = ctrl.atol + ctrl.rtol * np.abs(x0)
    d0 = float(np.max(np.abs(x0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    x1 = x0 + h0 * f0
    f1 = f(t0 + h0, x1)
    d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, t_end - t0)


class _BaselineApi:
    """Handler-facing state mutation API mirroring the event engine's."""

    def __init__(self, x, n):
        self.x = x
        self.pinned_until = [None] * n
        self.counters = {}
        self.pending_unpins = []
        self.t = 0.0

    def set_state(self, i, value):
        self.x[i] = value

    def add_state(self, i, delta):
        self.x[i] += delta

    def pin(self, i, until):
        self.pinned_until[i] = until
        heappush(self.pending_unpins, (until, i))

    def count(self, key, inc=1):
        self.counters[key] = self.counters.get(key, 0) + inc

    def state_value(self, i):
        return self.x[i]


def dopri_run(model, rtol, atol, t_end, sample_times=None, max_steps=10 ** 8):
    """Adaptive DOPRI 5(4) integration of a ModelSpec to t_end.

    Zero crossings are detected by a directional sign change of the guard
    over each accepted step, localized by bisection on the dense output to
    1e-12 * t_end, and fire the model handler; integration restarts from the
    event time.  Timed discontinuities and refractory un-freezes bound the
    step so they land on step boundaries.  atol is scaled per variable by the
    model's quantum_scale, mirroring the event engine's quantum semantics.
    """
    n = model.dim
    atol_arr = np.full(n, float(atol))
    if model.quantum_scale is not None:
        atol_arr *= np.asarray(model.quantum_scale, dtype=float)
    ctrl = RkController(rtol=float(rtol), atol=atol_arr)

    x = np.array(model.x0, dtype=float)
    api = _BaselineApi(x, n)
    mask = np.ones(n)   # zero rows freeze refractory variables

    def f(t, y):
        return model.rhs_vec(y, t) * mask

    timed = list(getattr(model, "timed_events", ()) or ())
    timed_ptr = 0
    zcs = list(getattr(model, "zero_crossings", ()) or ())

    st = None if sample_times is None else np.asarray(sample_times, dtype=float)
    samples = None if st is None else np.empty((len(st), n))
    sp = 0

    start = _time.perf_counter()
    t = 0.0
    f0 = f(t, x)
    h = _initial_step(f, t, x, f0, ctrl, t_end)
    h_floor = 1e-14 * t_end
    accepted = 0
    events = 0
    loc_tol = 1e-12 * t_end

    def unpin_due(now):
        while api.pending_unpins and api.pending_unpins[0][0] <= now + h_floor:
            _tu, i = heappop(api.pending_unpins)
            api.pinned_until[i] = None
            mask[i] = 1.0

    while t < t_end and accepted < max_steps:
        # next hard boundary: timed event, un-freeze, or the horizon
        bound = t_end
        if timed_ptr < len(timed):
            bound = min(bound, timed[timed_ptr][0])
        if api.pending_unpins:
            bound = min(bound, api.pending_unpins[0][0])
        if bound - t <= h_floor:
            # apply boundary discontinuities and restart
            t = bound
            api.t = t
            unpin_due(t)
            while timed_ptr < len(timed) and timed[timed_ptr][0] <= t + h_floor:
                model.timed_handler(api, t, timed[timed_ptr][1])
                timed_ptr += 1
                events += 1
            f0 = f(t, x)
            continue
        h = min(h, bound - t)
        if h < h_floor:
            raise StepUnderflow(f"step size {h:g} below floor at t={t:g}")

        x1, err, k = dopri_step(f, t, x, h, k1=f0)
        err_norm = ctrl.error_norm(err, x, x1)
        if err_norm > 1.0:
            h *= ctrl.factor(err_norm)
            continue

        # accepted; look for the earliest zero crossing inside the step
        rcont = dense_factors(x, x1, k, h)
        t_ev = None
        zc_ev = None
        for zc in zcs:
            if api.pinned_until[zc.var] is not None:
                continue
            g0 = x[zc.var] - zc.level
            g1 = x1[zc.var] - zc.level
            if zc.direction >= 0 and g0 < 0.0 <= g1:
                pass
            elif zc.direction <= 0 and g0 > 0.0 >= g1:
                pass
            else:
                continue
            rc = tuple(r[zc.var] for r in rcont)
            lo, hi = 0.0, 1.0
            while (hi - lo) * h > loc_tol:
                mid = 0.5 * (lo + hi)
                gm = dense_eval(rc, mid) - zc.level
                if (gm < 0.0) == (g0 < 0.0):
                    lo = mid
                else:
                    hi = mid
            tc = t + hi * h
            if t_ev is None or tc < t_ev:
                t_ev, zc_ev = tc, zc

        t_next = t_ev if t_ev is not None else t + h
        if st is not None:
            while sp < len(st) and st[sp] <= t_next:
                theta = (st[sp] - t) / h
                samples[sp] = dense_eval(rcont, min(max(theta, 0.0), 1.0))
                sp += 1

        accepted += 1
        if t_ev is not None:
            theta = (t_ev - t) / h
            x = dense_eval(rcont, theta)
            api.x = x
            t = t_ev
            api.t = t
            zc_ev.handler(api, t, zc_ev)
            events += 1
            mask[:] = 1.0
            for i, until in enumerate(api.pinned_until):
                if until is not None:
                    mask[i] = 0.0
            f0 = f(t, x)   # restart (FSAL invalid after the discontinuity)
        else:
            x = x1
            api.x = x
            t = t + h
            api.t = t
            f0 = k[6]
            h *= ctrl.factor(err_norm)

    wall_ms = (_time.perf_counter() - start) * 1e3
    return SimStats(
        method="dopri",
        order=5,
        t_end=t_end,
        steps=None,
        total_steps=accepted,
        events=events,
        counters=dict(api.counters),
        wall_ms=wall_ms,
        sample_times=st,
        samples=samples,
    )
