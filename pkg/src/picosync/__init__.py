"""Decentralized picosecond time alignment for distributed wireless arrays."""

from .clock import ClockState, advance, init_clocks, local_time, true_offset
from .consensus import (
    TopologyGraph,
    consensus_step,
    convergence_metrics,
    metropolis_hastings_weights,
)
from .config import ConfigError, ExperimentConfig, load_config
from .estimation import BiasLut, ToaEstimate, build_bias_lut, estimate_toa, matched_filter, qls_refine
from .simulator import ExperimentRecord, precision_accuracy, run_epoch, run_experiment, run_sweep
from .twtt import TimestampQuad, compute_offset, compute_propagation_delay, exchange
from .waveform import (
    TwoToneWaveform,
    crlb_variance,
    generate_two_tone,
    mean_square_bandwidth,
    network_crlb,
)

__version__ = "0.1.0"
