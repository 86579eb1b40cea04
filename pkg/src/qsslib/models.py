"""Benchmark models: scalar linear ODE, 1-D advection-diffusion-reaction,
and a leaky integrate-and-fire spiking network with stochastic input.

Each model carries two right-hand-side forms over the same equations: a
per-variable polynomial form evaluated over quantized-state trajectories
(used by the event-driven engine) and a vectorized numpy form (used by the
discrete-time baseline).  Units are SI throughout; quantum_scale converts the
benchmark tolerances, which are stated in the model's natural units (mV, nA
for the network), into SI per variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ModelSpec",
    "ZeroCrossing",
    "SnnParams",
    "InvalidTopology",
    "scalar_model",
    "adr_model",
    "snn_model",
]


class InvalidTopology(ValueError):
    pass


@dataclass
class ZeroCrossing:
    """Guard x[var] - level with a discontinuity handler.

    direction +1 fires on rising crossings, -1 falling, 0 any.  The handler
    receives (sim, t, zc) where sim exposes set_state/add_state/pin/count.
    """

    var: int
    level: float
    direction: int
    handler: Callable


@dataclass
class ModelSpec:
    """Right-hand side, structure and event wiring of one benchmark model."""

    dim: int
    x0: np.ndarray
    rhs_poly: Callable                  # (i, Q, t) -> derivative poly coeffs
    diag_jac: Callable                  # (i, q_i value) -> d f_i / d x_i
    incidence: list                     # incidence[i]: indices f_i reads
    rhs_vec: Callable                   # (x, t) -> np.ndarray
    names: list
    zero_crossings: list = field(default_factory=list)
    timed_events: list = field(default_factory=list)   # sorted (time, payload)
    timed_handler: Optional[Callable] = None
    quantum_scale: Optional[np.ndarray] = None
    exact_solution: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def dependents(self):
        """dependents[i]: variables j != i whose derivative reads q_i."""
        deps = [[] for _ in range(self.dim)]
        for j, inc in enumerate(self.incidence):
            for i in inc:
                if i != j:
                    deps[i].append(j)
        return [tuple(d) for d in deps]


# -- scalar linear test problem ------------------------------------------------

def scalar_model():
    """dx/dt = 1 - x, x(0) = 0; exact solution 1 - exp(-t)."""

    def rhs_poly(i, Q, t):
        q = Q[0]
        return (1.0 - q[0], -q[1], -q[2])

    def diag_jac(i, qi):
        return -1.0

    def rhs_vec(x, t):
        return 1.0 - x

    return ModelSpec(
        dim=1,
        x0=np.zeros(1),
        rhs_poly=rhs_poly,
        diag_jac=diag_jac,
        incidence=[(0,)],
        rhs_vec=rhs_vec,
        names=["x0"],
        exact_solution=lambda t: 1.0 - np.exp(-np.asarray(t, dtype=float)),
        params={"model": "scalar"},
    )


# -- 1-D advection-diffusion-reaction -------------------------------------------

def adr_model(n=100, advection=1.0, diffusion=0.1, reaction=100.0,
              length=10.0, inflow=1.0):
    """Upwind/central semi-discretization of the 1-D ADR equation.

    dx_i/dt = -A (x_i - x_{i-1})/dx + D (x_{i+1} - 2 x_i + x_{i-1})/dx^2
              + R (x_i^2 - x_i^3)
    with a fixed inflow value at the left face and a zero-gradient advective
    outflow at the right; x(0) = 0.
    """
    if n < 3:
        raise ValueError("ADR grid needs at least 3 cells")
    dx = length / n
    ca = advection / dx
    cd = diffusion / (dx * dx)
    r = reaction
    last = n - 1

    def rhs_poly(i, Q, t):
        q = Q[i]
        q0, q1, q2 = q[0], q[1], q[2]
        # reaction q^2 - q^3, truncated to degree 2
        q0q0 = q0 * q0
        s0 = q0q0 * (1.0 - q0)
        s1 = q0 * q1 * (2.0 - 3.0 * q0)
        s2 = q0 * q2 * (2.0 - 3.0 * q0) + q1 * q1 * (1.0 - 3.0 * q0)
        if i == 0:
            qr = Q[1]
            return (
                -ca * (q0 - inflow) + cd * (qr[0] - 2.0 * q0 + inflow) + r * s0,
                -ca * q1 + cd * (qr[1] - 2.0 * q1) + r * s1,
                -ca * q2 + cd * (qr[2] - 2.0 * q2) + r * s2,
            )
        ql = Q[i - 1]
        if i == last:
            return (
                -ca * (q0 - ql[0]) + cd * (2.0 * ql[0] - 2.0 * q0) + r * s0,
                -ca * (q1 - ql[1]) + cd * (2.0 * ql[1] - 2.0 * q1) + r * s1,
                -ca * (q2 - ql[2]) + cd * (2.0 * ql[2] - 2.0 * q2) + r * s2,
            )
        qr = Q[i + 1]
        return (
            -ca * (q0 - ql[0]) + cd * (qr[0] - 2.0 * q0 + ql[0]) + r * s0,
            -ca * (q1 - ql[1]) + cd * (qr[1] - 2.0 * q1 + ql[1]) + r * s1,
            -ca * (q2 - ql[2]) + cd * (qr[2] - 2.0 * q2 + ql[2]) + r * s2,
        )

    def diag_jac(i, qi):
        return -ca - 2.0 * cd + r * (2.0 - 3.0 * qi) * qi

    def rhs_vec(x, t):
        dxdt = np.empty_like(x)
        dxdt[0] = (-ca * (x[0] - inflow) + cd * (x[1] - 2.0 * x[0] + inflow)
                   + r * (x[0] ** 2 - x[0] ** 3))
        dxdt[1:-1] = (-ca * (x[1:-1] - x[:-2])
                      + cd * (x[2:] - 2.0 * x[1:-1] + x[:-2])
                      + r * (x[1:-1] ** 2 - x[1:-1] ** 3))
        dxdt[-1] = (-ca * (x[-1] - x[-2]) + cd * (2.0 * x[-2] - 2.0 * x[-1])
                    + r * (x[-1] ** 2 - x[-1] ** 3))
        return dxdt

    incidence = []
    for i in range(n):
        inc = tuple(j for j in (i - 1, i, i + 1) if 0 <= j < n)
        incidence.append(inc)

    return ModelSpec(
        dim=n,
        x0=np.zeros(n),
        rhs_poly=rhs_poly,
        diag_jac=diag_jac,
        incidence=incidence,
        rhs_vec=rhs_vec,
        names=[f"x{i}" for i in range(n)],
        params={"model": "adr", "N": n, "A": advection, "D": diffusion,
                "R": reaction, "L": length, "inflow": inflow},
    )


# -- LIF spiking neural network --------------------------------------------------

# unit conversions for the quantum / atol settings, which the benchmarks state
# in the model's natural units
_I_SCALE = 1e-9   # nA -> A
_V_SCALE = 1e-3   # mV -> V

_TAG_TOPOLOGY = 0
_TAG_EFFICACY = 1
_TAG_INIT = 2
_TAG_ARRIVALS = 3


@dataclass
class SnnParams:
    """LIF network parameters (SI units)."""

    n_e: int = 1000             # total neurons
    exc_fraction: float = 0.8   # share of excitatory neurons
    m_in: int = 10              # presynaptic sources per neuron
    m_exc: int = 8              # ... of which excitatory
    tau_m: float = 10e-3        # membrane time constant (s)
    tau_r: float = 2e-3         # absolute refractory time (s)
    tau_s: float = 0.5e-3       # synaptic current decay constant (s)
    c_m: float = 250e-12        # membrane capacitance (F)
    v_r: float = -65e-3         # reset potential (V)
    theta: float = -50e-3       # firing threshold (V)
    e_l: float = -65e-3         # leak reversal potential (V)
    nu_bg: float = 8.0          # average external spike rate (1/s)
    k_ext: int = 940            # external inputs per neuron
    j_mean: float = 87.8e-12    # synaptic efficacy mean (A)
    j_sd: float = 8.78e-12      # synaptic efficacy sd (A)
    g_inh: float = 4.0          # inhibitory/excitatory efficacy ratio
    v0_lo: float = -65e-3       # initial V ~ U[v0_lo, v0_hi]
    v0_hi: float = -64e-3
    i0_lo: float = 0.4e-9       # initial I_s ~ U[i0_lo, i0_hi]
    i0_hi: float = 0.5e-9
    seed: int = 0
    t_end: float = 0.05         # horizon for pre-generated arrival trains (s)

    def __post_init__(self):
        if min(self.tau_m, self.tau_r, self.tau_s) <= 0.0:
            raise ValueError("time constants must be positive")
        if self.theta <= self.v_r:
            raise ValueError("threshold must exceed the reset potential")


def _rng(seed, tag, k=0):
    return np.random.Generator(np.random.Philox(
        key=np.random.SeedSequence((seed, tag, k)).generate_state(2, np.uint64)))


def _positive_normal(gen, mean, sd):
    for _ in range(1000):
        v = gen.normal(mean, sd)
        if v > 0.0:
            return v
    raise ValueError("efficacy distribution is not effectively positive")


def snn_model(params: SnnParams = None, **overrides):
    """LIF network: states (I_s, V) per neuron, threshold spikes, Poisson input.

    State layout: index 2k is the synaptic current of neuron k, 2k+1 its
    membrane potential.  Spikes reset V, open the refractory window and
    increment the targets' synaptic currents; external Poisson arrivals are
    pre-generated per neuron from a counter-based RNG keyed by (seed, neuron).
    """
    if params is None:
        params = SnnParams(**overrides)
    elif overrides:
        raise ValueError("pass either params or keyword overrides, not both")
    p = params
    n_exc = int(round(p.n_e * p.exc_fraction))
    n_inh = p.n_e - n_exc
    m_inh = p.m_in - p.m_exc
    if p.m_exc > max(n_exc - 1, 0) or m_inh > max(n_inh - 1, 0) or m_inh < 0:
        raise InvalidTopology(
            f"cannot draw {p.m_exc} excitatory + {m_inh} inhibitory distinct "
            f"sources from pools of {n_exc}/{n_inh}")

    # per-neuron efficacy draw: exc neurons send d_k, inh neurons send g*d_k,
    # external arrivals to neuron k weigh d_k
    draws = np.array([_positive_normal(_rng(p.seed, _TAG_EFFICACY, k),
                                       p.j_mean, p.j_sd)
                      for k in range(p.n_e)])
    send_weight = draws.copy()
    send_weight[n_exc:] *= -p.g_inh   # inhibitory neurons subtract g*d_k

    # random in-degree-m topology; targets[s] lists postsynaptic neurons of s
    targets = [[] for _ in range(p.n_e)]
    exc_pool = np.arange(n_exc)
    inh_pool = np.arange(n_exc, p.n_e)
    for k in range(p.n_e):
        gen = _rng(p.seed, _TAG_TOPOLOGY, k)
        epool = exc_pool[exc_pool != k]
        ipool = inh_pool[inh_pool != k]
        for s in gen.choice(epool, size=p.m_exc, replace=False):
            targets[int(s)].append(k)
        for s in gen.choice(ipool, size=m_inh, replace=False):
            targets[int(s)].append(k)

    # initial conditions
    x0 = np.empty(2 * p.n_e)
    for k in range(p.n_e):
        gen = _rng(p.seed, _TAG_INIT, k)
        x0[2 * k] = gen.uniform(p.i0_lo, p.i0_hi)
        x0[2 * k + 1] = gen.uniform(p.v0_lo, p.v0_hi)

    # external Poisson arrival trains
    nu_ext = p.k_ext * p.nu_bg
    arrivals = []
    for k in range(p.n_e):
        gen = _rng(p.seed, _TAG_ARRIVALS, k)
        t = 0.0
        while True:
            t += gen.exponential(1.0 / nu_ext)
            if t > p.t_end:
                break
            arrivals.append((t, k))
    arrivals.sort()

    inv_tau_s = 1.0 / p.tau_s
    inv_tau_m = 1.0 / p.tau_m
    inv_c_m = 1.0 / p.c_m
    e_l = p.e_l

    def rhs_poly(i, Q, t):
        q = Q[i]
        if not i & 1:   # synaptic current: dI/dt = -I/tau_s
            return (-q[0] * inv_tau_s, -q[1] * inv_tau_s, -q[2] * inv_tau_s)
        qi = Q[i - 1]   # dV/dt = -(V - E_L)/tau_m + I/C_m
        return (
            (e_l - q[0]) * inv_tau_m + qi[0] * inv_c_m,
            -q[1] * inv_tau_m + qi[1] * inv_c_m,
            -q[2] * inv_tau_m + qi[2] * inv_c_m,
        )

    def diag_jac(i, qi):
        return -inv_tau_s if not i & 1 else -inv_tau_m

    def rhs_vec(x, t):
        cur = x[0::2]
        v = x[1::2]
        out = np.empty_like(x)
        out[0::2] = -cur * inv_tau_s
        out[1::2] = (e_l - v) * inv_tau_m + cur * inv_c_m
        return out

    def make_spike_handler(k):
        v_idx = 2 * k + 1
        w = send_weight[k]
        tgt = tuple(targets[k])

        def handler(sim, t, zc):
            sim.count("spikes")
            sim.set_state(v_idx, p.v_r)
            sim.pin(v_idx, t + p.tau_r)
            for j in tgt:
                sim.add_state(2 * j, w)
        return handler

    def timed_handler(sim, t, neuron):
        sim.add_state(2 * neuron, draws[neuron])

    incidence = []
    names = []
    for k in range(p.n_e):
        incidence.append((2 * k,))
        incidence.append((2 * k, 2 * k + 1))
        names.append(f"Is{k}")
        names.append(f"V{k}")

    scale = np.empty(2 * p.n_e)
    scale[0::2] = _I_SCALE
    scale[1::2] = _V_SCALE

    zcs = [ZeroCrossing(2 * k + 1, p.theta, +1, make_spike_handler(k))
           for k in range(p.n_e)]

    return ModelSpec(
        dim=2 * p.n_e,
        x0=x0,
        rhs_poly=rhs_poly,
        diag_jac=diag_jac,
        incidence=incidence,
        rhs_vec=rhs_vec,
        names=names,
        zero_crossings=zcs,
        timed_events=arrivals,
        timed_handler=timed_handler,
        quantum_scale=scale,
        params={"model": "snn", "n_e": p.n_e, "n_exc": n_exc, "seed": p.seed,
                "nu_ext": nu_ext, "t_end": p.t_end},
    )
