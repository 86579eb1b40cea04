"""Benchmark front end: run one solver configuration (repeated over seeds),
emit trajectory/stats/benchmark files, or build reference solutions.

Outputs are plain text: trajectory CSV (`time,<var0>,...`, 17 significant
digits), stats as key=value lines, and one aggregate row per invocation in
the benchmark CSV.  A flat key=value config file can pre-set any flag;
explicit command-line flags win.  QSS_SOLVER_THREADS caps how many of the
repeated runs execute in parallel.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import activity, metrics
from .baseline import dopri_run
from .engine import QuantumSpec, Simulation
from .models import SnnParams, adr_model, scalar_model, snn_model

__all__ = ["main", "run_benchmark", "make_reference", "build_model",
           "write_traj_csv", "read_traj_csv"]

_MODEL_DEFAULTS = {
    # per-model experiment defaults
    "scalar": {"tend": 5.0, "runs": 1, "rtol": 0.0, "atol": 1e-2},
    "adr": {"tend": 3.0, "runs": 1, "rtol": 1e-3, "atol": 1e-5},
    "snn": {"tend": 0.05, "runs": 10, "rtol": 0.0, "atol": 1e-3},
}

_SNN_PARAM_UNITS = {
    # CLI accepts the natural-unit forms; converted to SI here
    "tau_m_ms": ("tau_m", 1e-3), "tau_r_ms": ("tau_r", 1e-3),
    "tau_s_ms": ("tau_s", 1e-3), "c_m_pf": ("c_m", 1e-12),
    "v_r_mv": ("v_r", 1e-3), "theta_mv": ("theta", 1e-3),
    "e_l_mv": ("e_l", 1e-3), "j_mean_pa": ("j_mean", 1e-12),
    "j_sd_pa": ("j_sd", 1e-12),
}


def build_model(name, params, seed=0, t_end=None):
    """Construct a benchmark model from CLI-style parameter overrides."""
    if name == "scalar":
        return scalar_model()
    if name == "adr":
        kw = {}
        for src, dst in (("N", "n"), ("A", "advection"), ("D", "diffusion"),
                         ("R", "reaction"), ("L", "length"),
                         ("inflow", "inflow")):
            if src in params:
                kw[dst] = type_cast(params[src])
        if "n" in kw:
            kw["n"] = int(kw["n"])
        return adr_model(**kw)
    if name == "snn":
        kw = {"seed": seed}
        if t_end is not None:
            kw["t_end"] = t_end
        for key, val in params.items():
            if key in _SNN_PARAM_UNITS:
                dst, fac = _SNN_PARAM_UNITS[key]
                kw[dst] = float(val) * fac
            elif key in SnnParams.__dataclass_fields__:
                field_type = SnnParams.__dataclass_fields__[key].type
                kw[key] = int(val) if field_type == "int" else float(val)
            else:
                raise SystemExit(f"unknown snn parameter {key!r}")
        return snn_model(SnnParams(**kw))
    raise SystemExit(f"unknown model {name!r}")


def type_cast(s):
    try:
        return float(s)
    except ValueError:
        return s


def write_traj_csv(path, names, times, values):
    with open(path, "w") as fh:
        fh.write("time," + ",".join(names) + "\n")
        for k, t in enumerate(times):
            row = values[k]
            fh.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")


def read_traj_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header[1:], data[:, 0], data[:, 1:]


def write_snn_ref(path, seed_counts):
    with open(path, "w") as fh:
        fh.write("seed,spikes\n")
        for seed, count in sorted(seed_counts.items()):
            fh.write(f"{seed},{count}\n")


def read_snn_ref(path):
    counts = {}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            if line.strip():
                seed, count = line.strip().split(",")
                counts[int(seed)] = int(count)
    return counts


def _sample_grid(args):
    if args.sample_dt is not None:
        n = int(math.floor(args.tend / args.sample_dt + 1e-9)) + 1
        return np.linspace(0.0, (n - 1) * args.sample_dt, n)
    if args.model == "snn" and args.traj_out is None:
        return None   # sampling is pure overhead for spike-count metrics
    return np.linspace(0.0, args.tend, 500)


def _single_run(args_dict, seed):
    """One simulation run; module-level so sweeps can use worker processes."""
    args = argparse.Namespace(**args_dict)
    model = build_model(args.model, args.params, seed=seed, t_end=args.tend)
    grid = _sample_grid(args)
    if args.method == "dopri":
        stats = dopri_run(model, args.rtol, args.atol, args.tend,
                          sample_times=grid)
    else:
        sim = Simulation(model, args.method, args.order,
                         QuantumSpec(rel=args.rtol, abs=args.atol),
                         args.tend, sample_times=grid)
        stats = sim.run()
    return model, stats


def _theor_min(args, ref):
    """Sum of the general step lower bounds, using the absolute quantum."""
    if args.method == "dopri":
        return None
    n = args.order
    if args.model == "scalar":
        act = activity.activity_n(lambda t: np.exp(-t), n, 0.0, args.tend)
        return activity.min_steps_general(act, args.atol, n)
    if args.model == "adr" and ref is not None:
        _names, times, values = ref
        total = 0.0
        for i in range(values.shape[1]):
            deriv = activity.spline_derivative(times, values[:, i], n)
            act = activity.activity_n(deriv, n, float(times[0]), float(times[-1]))
            total += activity.min_steps_general(act, args.atol, n)
        return total
    return None


def run_benchmark(args):
    seeds = [args.seed + r for r in range(args.runs)]
    threads = int(os.environ.get("QSS_SOLVER_THREADS", "1"))
    args_dict = vars(args)
    if threads > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_for_seed, [(args_dict, s) for s in seeds]))
    else:
        results = [_single_run(args_dict, s) for s in seeds]

    ref = None
    ref_counts = None
    if args.ref_in:
        if args.model == "snn":
            ref_counts = read_snn_ref(args.ref_in)
        else:
            ref = read_traj_csv(args.ref_in)

    maes, mres = [], []
    model0, stats0 = results[0]
    for (model, stats), seed in zip(results, seeds):
        if args.model == "snn":
            if ref_counts is not None:
                if seed not in ref_counts:
                    raise SystemExit(f"reference file lacks seed {seed}")
                mres.append((stats.counters.get("spikes", 0), ref_counts[seed]))
        elif stats.samples is not None:
            if ref is not None:
                maes.append(metrics.mae(stats.sample_times, stats.samples,
                                        ref[1], ref[2]))
            elif model.exact_solution is not None:
                exact = model.exact_solution(stats.sample_times)
                maes.append(float(np.mean(np.abs(
                    stats.samples[:, 0] - exact))))

    err_value = None
    err_kind = ""
    if maes:
        err_value, err_kind = float(np.mean(maes)), "mae"
    elif mres:
        sim_counts = [s for s, _ in mres]
        refc = [r for _, r in mres]
        err_value, err_kind = metrics.mre_spikes(sim_counts, refc), "mre"

    theor = _theor_min(args, ref)

    if args.traj_out and stats0.samples is not None:
        write_traj_csv(args.traj_out, model0.names, stats0.sample_times,
                       stats0.samples)

    steps_mean = float(np.mean([s.total_steps for _, s in results]))
    wall_mean = float(np.mean([s.wall_ms for _, s in results]))

    if args.stats_out:
        with open(args.stats_out, "w") as fh:
            fh.write(f"total_steps={stats0.total_steps}\n")
            fh.write(f"events={stats0.events}\n")
            fh.write(f"wall_ms={stats0.wall_ms:.6g}\n")
            if stats0.steps is not None:
                for i, s in enumerate(stats0.steps):
                    fh.write(f"steps[{i}]={s}\n")
            for key in sorted(stats0.counters):
                fh.write(f"{key}={stats0.counters[key]}\n")
            fh.write(f"runs={args.runs}\n")
            fh.write(f"steps_mean={steps_mean:.17g}\n")
            fh.write(f"wall_ms_mean={wall_mean:.6g}\n")
            if err_value is not None:
                fh.write(f"{err_kind}={err_value:.17g}\n")

    if args.bench_out:
        header = ("model,method,order,rtol,atol,steps_mean,wall_ms_mean,"
                  "mae_or_mre,theor_min\n")
        need_header = not os.path.exists(args.bench_out)
        with open(args.bench_out, "a") as fh:
            if need_header:
                fh.write(header)
            fh.write("%s,%s,%d,%.17g,%.17g,%.17g,%.6g,%s,%s\n" % (
                args.model, args.method, args.order, args.rtol, args.atol,
                steps_mean, wall_mean,
                "" if err_value is None else "%.17g" % err_value,
                "" if theor is None else "%.17g" % theor))

    line = (f"{args.model} {args.method}{args.order if args.method != 'dopri' else ''}"
            f" rtol={args.rtol:g} atol={args.atol:g}"
            f" steps_mean={steps_mean:g} wall_ms_mean={wall_mean:.3g}")
    if err_value is not None:
        line += f" {err_kind}={err_value:.3g}"
    print(line)
    return 0


def _run_for_seed(packed):
    return _single_run(*packed)


def make_reference(args):
    """Run the model's tight reference configuration and persist it."""
    cfg = metrics.reference_settings[args.model]
    args.method = cfg["method"]
    args.order = cfg["order"]
    args.rtol = cfg["rtol"]
    args.atol = cfg["atol"]
    if args.model == "snn":
        counts = {}
        for r in range(args.runs):
            seed = args.seed + r
            _model, stats = _single_run(vars(args), seed)
            counts[seed] = stats.counters.get("spikes", 0)
        write_snn_ref(args.ref_out, counts)
    else:
        model, stats = _single_run(vars(args), args.seed)
        write_traj_csv(args.ref_out, model.names, stats.sample_times,
                       stats.samples)
    print(f"reference written to {args.ref_out}")
    return 0


def _parse_params(pairs):
    params = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise SystemExit(f"--param expects key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        params[key] = val
    return params


def _load_config(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="qsslib",
        description="Quantized-state ODE solver benchmarks")
    ap.add_argument("--config", help="key=value file pre-setting any flag")
    ap.add_argument("--model", choices=("scalar", "adr", "snn"))
    ap.add_argument("--method",
                    choices=("qss", "liqss", "eliqss", "cheqss", "dopri"))
    ap.add_argument("--order", type=int, choices=(1, 2, 3))
    ap.add_argument("--rtol", type=float)
    ap.add_argument("--atol", type=float)
    ap.add_argument("--tend", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--runs", type=int)
    ap.add_argument("--sample-dt", dest="sample_dt", type=float)
    ap.add_argument("--traj-out", dest="traj_out")
    ap.add_argument("--stats-out", dest="stats_out")
    ap.add_argument("--bench-out", dest="bench_out")
    ap.add_argument("--ref-in", dest="ref_in")
    ap.add_argument("--ref-out", dest="ref_out")
    ap.add_argument("--param", action="append",
                    help="model parameter override key=value (repeatable)")
    args = ap.parse_args(argv)

    if args.config:
        loaded = _load_config(args.config)
        for key, val in loaded.items():
            if key == "param":
                args.param = (args.param or []) + val.split()
                continue
            if getattr(args, key, None) is None:
                typ = {"order": int, "seed": int, "runs": int,
                       "rtol": float, "atol": float, "tend": float,
                       "sample_dt": float}.get(key, str)
                setattr(args, key, typ(val))

    if args.model is None:
        ap.error("--model is required (flag or config file)")
    defaults = _MODEL_DEFAULTS[args.model]
    if args.tend is None:
        args.tend = defaults["tend"]
    if args.runs is None:
        args.runs = defaults["runs"]
    if args.rtol is None:
        args.rtol = defaults["rtol"]
    if args.atol is None:
        args.atol = defaults["atol"]
    if args.seed is None:
        args.seed = 0
    if args.method is None:
        args.method = "cheqss"
    if args.order is None:
        args.order = 2
    args.params = _parse_params(args.param)

    try:
        if args.ref_out:
            return make_reference(args)
        return run_benchmark(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
