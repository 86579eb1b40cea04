"""Error metrics against high-accuracy references.

MAE: mean absolute trajectory error per variable, averaged over variables,
on a shared output grid (used for the ADR and scalar benchmarks).  MRE: mean
relative error of total output-spike counts across seed-matched runs (used
for the spiking network, whose chaotic trajectories make pointwise errors
meaningless).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "GridMismatch",
    "ZeroReference",
    "mae",
    "mre_spikes",
    "reference_settings",
]

# Reference-run configurations: very tight CheQSS runs of the same models.
reference_settings = {
    "scalar": {"method": "cheqss", "order": 2, "rtol": 1e-10, "atol": 1e-12},
    "adr": {"method": "cheqss", "order": 2, "rtol": 1e-10, "atol": 1e-12},
    "snn": {"method": "cheqss", "order": 3, "rtol": 0.0, "atol": 1e-10},
}


class GridMismatch(ValueError):
    pass


class ZeroReference(ValueError):
    pass


def mae(sim_times, sim_values, ref_times, ref_values):
    """Mean over variables of the mean absolute pointwise error.

    Both trajectories must be sampled on the identical output grid.
    """
    st = np.asarray(sim_times, dtype=float)
    rt = np.asarray(ref_times, dtype=float)
    if st.shape != rt.shape or not np.array_equal(st, rt):
        raise GridMismatch("output grids differ")
    sv = np.asarray(sim_values, dtype=float)
    rv = np.asarray(ref_values, dtype=float)
    if sv.shape != rv.shape:
        raise GridMismatch(f"sample shapes differ: {sv.shape} vs {rv.shape}")
    return float(np.mean(np.abs(sv - rv)))


def mre_spikes(sim_counts, ref_counts):
    """Mean relative error between seed-matched total spike counts."""
    sim = np.asarray(sim_counts, dtype=float)
    ref = np.asarray(ref_counts, dtype=float)
    if sim.shape != ref.shape:
        raise GridMismatch(f"count arrays differ in shape: {sim.shape} vs {ref.shape}")
    if np.any(ref == 0.0):
        raise ZeroReference("reference spike count of zero")
    return float(np.mean(np.abs(ref - sim) / ref))
