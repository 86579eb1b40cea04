"""Asynchronous event-driven integration loop for the quantized-state methods.

One Simulation owns per-variable state/quantized-state polynomials, a time
heap of pending events (internal quantizations, zero crossings, timed
discontinuities) and the dependency wiring from the model's incidence sets.
Processing an internal event touches only that variable and the variables
whose derivatives read it; discontinuity handlers mutate states through a
small API (set/add/pin/count) and the engine recomputes exactly the affected
derivative polynomials afterwards.

Quantum semantics follow logarithmic quantization: per-variable quantum
max(abs * scale_i, rel * |x_i|), refreshed at each internal event of the
variable.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from heapq import heappush, heappop, heapify
from typing import Optional

import numpy as np

from .polytraj import band_crossing, directed_zero_time
from .quantizer import POLICIES, quantize_coeffs

__all__ = [
    "QuantumSpec",
    "SimStats",
    "Simulation",
    "InvalidConfig",
    "StalledSimulation",
    "effective_quantum",
    "KIND_INTERNAL",
    "KIND_ZERO_CROSSING",
    "KIND_TIMED",
]

KIND_INTERNAL = 0
KIND_ZERO_CROSSING = 1
KIND_TIMED = 2

# An event that advances time by less than STALL_RTOL*t_end this many times
# in a row aborts the run.
STALL_LIMIT = 1_000_000
STALL_RTOL = 1e-14


class InvalidConfig(ValueError):
    pass


class StalledSimulation(RuntimeError):
    pass


@dataclass
class QuantumSpec:
    """Logarithmic quantization parameters (QSS analog of rtol/atol)."""

    rel: float = 0.0
    abs: float = 1e-3

    def __post_init__(self):
        if self.rel < 0.0:
            raise InvalidConfig("rel quantum must be >= 0")
        if self.abs <= 0.0:
            raise InvalidConfig("abs quantum must be > 0")


def effective_quantum(spec: QuantumSpec, x, scale=1.0):
    """max(abs*scale, rel*|x|); scale converts abs into the variable's units."""
    return max(spec.abs * scale, spec.rel * abs(x))


@dataclass
class SimStats:
    """Step counts, event counts, and sampled outputs of one run."""

    method: str
    order: int
    t_end: float
    steps: Optional[list] = None        # per-variable quantization transitions
    total_steps: int = 0
    events: int = 0                     # discontinuity events (crossings + timed)
    counters: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    sample_times: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    band_max: Optional[float] = None    # max |x-q|/quantum seen (if tracked)


class Simulation:
    """Event-driven run of one model with one quantization method.

    sample_times: optional increasing array of output times in [0, t_end].
    track_band: record max |x-q|/quantum over dense per-segment samples.
    on_event: optional callable(kind, index, time) invoked after each event.
    """

    def __init__(self, model, method, order, qspec: QuantumSpec, t_end,
                 sample_times=None, track_band=False, on_event=None,
                 stall_limit=STALL_LIMIT):
        if method not in POLICIES:
            raise InvalidConfig(f"unknown method {method!r}")
        if order not in (1, 2, 3):
            raise InvalidConfig(f"order must be 1, 2 or 3, got {order}")
        if t_end <= 0.0:
            raise InvalidConfig("t_end must be positive")
        self.model = model
        self.method = method
        self.order = order
        self.qspec = qspec
        self.t_end = float(t_end)
        self.on_event = on_event
        self._include_zero = method == "liqss"
        self._stall_limit = stall_limit
        self._stall_eps = STALL_RTOL * self.t_end

        n = model.dim
        self.n = n
        self.t = 0.0
        self.xc = [[float(v), 0.0, 0.0, 0.0] for v in model.x0]
        self.qc = [[float(v), 0.0, 0.0] for v in model.x0]
        self.torg = [0.0] * n
        self.quantum = [0.0] * n
        self.pinned_until = [None] * n
        self.steps = [0] * n
        self.events = 0
        self.counters = {}

        scale = getattr(model, "quantum_scale", None)
        self._qscale = [1.0] * n if scale is None else [float(s) for s in scale]

        self._deps = model.dependents()
        self._zcs = list(getattr(model, "zero_crossings", ()) or ())
        zc_of = [[] for _ in range(n)]
        for k, zc in enumerate(self._zcs):
            zc_of[zc.var].append(k)
        self._zc_of_var = zc_of

        self._heap = []
        self._ver_int = [0] * n
        self._ver_zc = [0] * len(self._zcs)
        self.next_internal = [math.inf] * n

        self._track_band = track_band
        self.band_max = 0.0 if track_band else None
        self._touched = set()
        self._stalls = 0

        self._sample_times = None
        self._samples = None
        self._sample_ptr = 0
        if sample_times is not None:
            st = np.asarray(sample_times, dtype=float)
            self._sample_times = st
            self._samples = np.empty((len(st), n))

        self._init_state()

    # -- initialization ------------------------------------------------------

    def _init_state(self):
        n, order = self.n, self.order
        # Hysteresis bootstrap: q starts at x, then the state Taylor
        # coefficients are warmed up by re-evaluating the rhs over the
        # truncated quantized trajectories (order passes fill degree `order`).
        # The bootstrap assignment counts as each variable's first transition.
        for i in range(n):
            self.steps[i] = 1
        for _ in range(order):
            for i in range(n):
                self._recompute_deriv(i)
            for i in range(n):
                x, q = self.xc[i], self.qc[i]
                q[0] = x[0]
                q[1] = x[1] if order >= 2 else 0.0
                q[2] = x[2] if order >= 3 else 0.0
        # Proper method quantization for every variable (counted transitions),
        # then derivatives from the final quantized states.
        for i in range(n):
            self._quantize_var(i)
        for i in range(n):
            self._recompute_deriv(i)
        for i in range(n):
            self._schedule_internal(i)
        for k in range(len(self._zcs)):
            self._schedule_zc(k)
        for idx, (tev, _payload) in enumerate(getattr(self.model, "timed_events", ()) or ()):
            if tev <= self.t_end:
                self._heap.append((tev, KIND_TIMED, idx, 0))
        heapify(self._heap)

    # -- kernel helpers ------------------------------------------------------

    def _sync(self, i, t):
        """Re-center variable i's polynomials at t (pointwise values preserved)."""
        dt = t - self.torg[i]
        if dt == 0.0:
            return
        if self._track_band:
            self._band_scan(i, dt)
        x = self.xc[i]
        c1, c2, c3 = x[1], x[2], x[3]
        x[0] += dt * (c1 + dt * (c2 + dt * c3))
        x[1] = c1 + dt * (2.0 * c2 + 3.0 * dt * c3)
        x[2] = c2 + 3.0 * dt * c3
        q = self.qc[i]
        q0, q1, q2 = q[0], q[1], q[2]
        q[0] = q0 + dt * (q1 + dt * q2)
        q[1] = q1 + 2.0 * dt * q2
        self.torg[i] = t

    def _band_scan(self, i, dt, points=8):
        x, q = self.xc[i], self.qc[i]
        qm = self.quantum[i]
        if qm <= 0.0:
            return
        worst = 0.0
        for s in range(points + 1):
            tau = dt * s / points
            p = (x[0] - q[0]) + tau * ((x[1] - q[1]) + tau * ((x[2] - q[2]) + tau * x[3]))
            ap = abs(p)
            if ap > worst:
                worst = ap
        ratio = worst / qm
        if ratio > self.band_max:
            self.band_max = ratio

    def _sync_inputs(self, i, t):
        for j in self.model.incidence[i]:
            if self.torg[j] != t:
                self._sync(j, t)

    def _recompute_deriv(self, i):
        """New dx_i/dt polynomial from the rhs over current quantized states."""
        f = self.model.rhs_poly(i, self.qc, self.torg[i])
        x = self.xc[i]
        order = self.order
        x[1] = f[0]
        x[2] = 0.5 * f[1] if order >= 2 else 0.0
        x[3] = f[2] / 3.0 if order >= 3 else 0.0

    def _quantize_var(self, i):
        """Refresh quantum, linearization and quantized segment of variable i."""
        x = self.xc[i]
        q = self.qc[i]
        qm = effective_quantum(self.qspec, x[0], self._qscale[i])
        self.quantum[i] = qm
        f = self.model.rhs_poly(i, self.qc, self.torg[i])
        a = self.model.diag_jac(i, q[0])
        order = self.order
        u0 = f[0] - a * q[0]
        u1 = (f[1] - a * q[1]) if order >= 2 else 0.0
        u2 = 2.0 * (f[2] - a * q[2]) if order >= 3 else 0.0
        q0, q1, q2, _p0, _tm, _eq = quantize_coeffs(
            order, self.method, x, a, u0, u1, u2, qm)
        q[0], q[1], q[2] = q0, q1, q2
        self.steps[i] += 1

    def _schedule_internal(self, i):
        self._ver_int[i] += 1
        if self.pinned_until[i] is not None:
            # frozen: the only internal event is the un-freeze
            self.next_internal[i] = self.pinned_until[i]
            heappush(self._heap, (self.pinned_until[i], KIND_INTERNAL, i,
                                  self._ver_int[i]))
            return
        t = self.torg[i]
        x, q = self.xc[i], self.qc[i]
        p = (x[0] - q[0], x[1] - q[1], x[2] - q[2], x[3])
        rel = band_crossing(p, self.quantum[i], self._include_zero,
                            horizon=self.t_end - t)
        if rel is None:
            self.next_internal[i] = math.inf
        else:
            tev = t + rel
            self.next_internal[i] = tev
            heappush(self._heap, (tev, KIND_INTERNAL, i, self._ver_int[i]))

    def _schedule_zc(self, k):
        self._ver_zc[k] += 1
        zc = self._zcs[k]
        v = zc.var
        if self.pinned_until[v] is not None:
            return
        t = self.torg[v]
        x = self.xc[v]
        root = directed_zero_time((x[0] - zc.level, x[1], x[2], x[3]),
                                  zc.direction, horizon=self.t_end - t)
        if root is not None:
            heappush(self._heap, (t + root, KIND_ZERO_CROSSING, k, self._ver_zc[k]))

    # -- handler API (used by model discontinuity handlers) -------------------

    def set_state(self, i, value):
        self._sync(i, self.t)
        self.xc[i][0] = float(value)
        self._touched.add(i)

    def add_state(self, i, delta):
        self._sync(i, self.t)
        self.xc[i][0] += delta
        self._touched.add(i)

    def pin(self, i, until):
        """Freeze variable i at its current value until the given time."""
        self._sync(i, self.t)
        x = self.xc[i]
        x[1] = x[2] = x[3] = 0.0
        q = self.qc[i]
        q[0], q[1], q[2] = x[0], 0.0, 0.0
        self.pinned_until[i] = until
        self._ver_int[i] += 1
        self.next_internal[i] = until
        heappush(self._heap, (until, KIND_INTERNAL, i, self._ver_int[i]))
        for k in self._zc_of_var[i]:
            self._ver_zc[k] += 1  # cancels any pending crossing
        self._touched.add(i)

    def count(self, key, inc=1):
        self.counters[key] = self.counters.get(key, 0) + inc

    def state_value(self, i):
        x = self.xc[i]
        dt = self.t - self.torg[i]
        return x[0] + dt * (x[1] + dt * (x[2] + dt * x[3]))

    # -- event processing ----------------------------------------------------

    def _apply_touched(self):
        touched = self._touched
        if not touched:
            return
        affected = set(touched)
        for v in touched:
            affected.update(self._deps[v])
        for v in sorted(affected):
            if self.pinned_until[v] is not None:
                continue
            self._sync(v, self.t)
            self._sync_inputs(v, self.t)
            self._recompute_deriv(v)
            self._schedule_internal(v)
            for k in self._zc_of_var[v]:
                self._schedule_zc(k)
        touched.clear()

    def _on_internal(self, i):
        t = self.t
        if self.pinned_until[i] is not None:
            # the scheduled unpin event: resume normal dynamics
            self.pinned_until[i] = None
        self._sync(i, t)
        self._sync_inputs(i, t)
        self._quantize_var(i)
        self._recompute_deriv(i)
        self._schedule_internal(i)
        for k in self._zc_of_var[i]:
            self._schedule_zc(k)
        for j in self._deps[i]:
            if self.pinned_until[j] is not None:
                continue
            self._sync(j, t)
            self._sync_inputs(j, t)
            self._recompute_deriv(j)
            self._schedule_internal(j)
            for k in self._zc_of_var[j]:
                self._schedule_zc(k)

    def _on_zero_crossing(self, k):
        zc = self._zcs[k]
        self._sync(zc.var, self.t)
        self.events += 1
        zc.handler(self, self.t, zc)
        self._apply_touched()
        if self.pinned_until[zc.var] is None:
            self._schedule_zc(k)

    def _on_timed(self, idx):
        _tev, payload = self.model.timed_events[idx]
        self.events += 1
        self.model.timed_handler(self, self.t, payload)
        self._apply_touched()

    def _emit_samples(self, up_to):
        st = self._sample_times
        ptr = self._sample_ptr
        out = self._samples
        n = self.n
        xc, torg = self.xc, self.torg
        while ptr < len(st) and st[ptr] <= up_to:
            s = float(st[ptr])
            row = out[ptr]
            for i in range(n):
                dt = s - torg[i]
                x = xc[i]
                row[i] = x[0] + dt * (x[1] + dt * (x[2] + dt * x[3]))
            ptr += 1
        self._sample_ptr = ptr

    def step(self):
        """Process the next event; returns (time, kind, index) or None at the end."""
        heap = self._heap
        while heap:
            t, kind, idx, ver = heappop(heap)
            if kind == KIND_INTERNAL:
                if ver != self._ver_int[idx]:
                    continue
            elif kind == KIND_ZERO_CROSSING:
                if ver != self._ver_zc[idx]:
                    continue
            if t > self.t_end:
                return None
            if self._sample_times is not None:
                self._emit_samples(t)
            if t - self.t < self._stall_eps:
                self._stalls += 1
                if self._stalls >= self._stall_limit:
                    raise StalledSimulation(
                        f"{self._stalls} consecutive events within "
                        f"{self._stall_eps:g} of t={self.t:.17g}")
            else:
                self._stalls = 0
            self.t = t
            if kind == KIND_INTERNAL:
                self._on_internal(idx)
            elif kind == KIND_ZERO_CROSSING:
                self._on_zero_crossing(idx)
            else:
                self._on_timed(idx)
            if self.on_event is not None:
                self.on_event(kind, idx, t)
            return (t, kind, idx)
        return None

    def run(self) -> SimStats:
        start = _time.perf_counter()
        while self.step() is not None:
            pass
        self.t = self.t_end
        if self._sample_times is not None:
            self._emit_samples(self.t_end)
        if self._track_band:
            for i in range(self.n):
                self._band_scan(i, self.t_end - self.torg[i])
        wall_ms = (_time.perf_counter() - start) * 1e3
        return SimStats(
            method=self.method,
            order=self.order,
            t_end=self.t_end,
            steps=list(self.steps),
            total_steps=sum(self.steps),
            events=self.events,
            counters=dict(self.counters),
            wall_ms=wall_ms,
            sample_times=self._sample_times,
            samples=self._samples,
            band_max=self.band_max,
        )
