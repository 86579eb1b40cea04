"""Event-driven quantized-state ODE solvers with a classic adaptive baseline.

Quantization methods: explicit QSS, LIQSS, extended LIQSS (band-only update
policy) and Chebyshev LIQSS, orders 1-3, plus Dormand-Prince 5(4) for
cross-validation.  See the cli module for the benchmark front end.
"""

from .engine import (InvalidConfig, QuantumSpec, SimStats, Simulation,
                     StalledSimulation, effective_quantum)
from .models import (InvalidTopology, ModelSpec, SnnParams, ZeroCrossing,
                     adr_model, scalar_model, snn_model)
from .polytraj import Trajectory, band_crossing_time, min_positive_root
from .quantizer import (NoPositiveRoot, QuantizedSegment, QuantizerContext,
                        chebyshev_T, compute_r, equilibrium_branch, quantize,
                        quantize_cheqss, quantize_liqss, quantize_qss)
from .baseline import RkController, dopri_run, dopri_step
from .activity import activity_n, min_steps_classic, min_steps_general
from .metrics import GridMismatch, ZeroReference, mae, mre_spikes

__version__ = "0.1.0"

__all__ = [
    "Trajectory", "min_positive_root", "band_crossing_time",
    "QuantizerContext", "QuantizedSegment", "NoPositiveRoot", "compute_r",
    "equilibrium_branch", "quantize", "quantize_liqss", "quantize_cheqss",
    "quantize_qss", "chebyshev_T",
    "QuantumSpec", "SimStats", "Simulation", "InvalidConfig",
    "StalledSimulation", "effective_quantum",
    "ModelSpec", "ZeroCrossing", "SnnParams", "InvalidTopology",
    "scalar_model", "adr_model", "snn_model",
    "RkController", "dopri_step", "dopri_run",
    "activity_n", "min_steps_classic", "min_steps_general",
    "mae", "mre_spikes", "GridMismatch", "ZeroReference",
]
