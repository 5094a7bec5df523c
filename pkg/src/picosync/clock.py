"""Per-node clock model.

A node's clock reads ``freq_scale * t + static_bias + dynamic_bias + noise``
in true time ``t``. The dynamic bias is a Wiener process advanced explicitly
by :func:`advance`. Consensus corrections never touch the hardware terms; they
accumulate in ``software_correction`` and are added to every timestamp the
node reports or schedules.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# Free-running pairwise drift of ~50 ps over 60 s for a four-node array.
DEFAULT_DRIFT_DIFFUSION = 1e-23  # s^2/s
DEFAULT_BIAS_RANGE = 50e-9  # s, PPS coarse alignment


@dataclass
class ClockState:
    node_id: int
    static_bias: float = 0.0
    dynamic_bias: float = 0.0
    drift_diffusion: float = 0.0
    jitter_std: float = 0.0
    freq_scale: float = 1.0
    software_correction: float = 0.0
    rng: np.random.Generator = field(
        default_factory=np.random.default_rng, repr=False, compare=False
    )

    @property
    def bias(self) -> float:
        """Total deterministic bias (static plus dynamic)."""
        return self.static_bias + self.dynamic_bias

    def offset(self, t_true: float = 0.0) -> float:
        """Deterministic reading minus true time, corrections included."""
        return (self.freq_scale - 1.0) * t_true + self.bias + self.software_correction

    def jitter(self) -> float:
        if self.jitter_std <= 0.0:
            return 0.0
        return float(self.rng.normal(0.0, self.jitter_std))


def local_time(clock: ClockState, t_true: float) -> float:
    """Software time shown by ``clock`` at true time ``t_true`` (one jitter draw)."""
    return clock.freq_scale * t_true + clock.offset(0.0) + clock.jitter()


def hardware_time(clock: ClockState, t_true: float) -> float:
    """Jitter-free hardware reading, i.e. without the software correction."""
    return clock.freq_scale * t_true + clock.bias


def edge_true_time(clock: ClockState, hw_tick: float) -> float:
    """True time at which the hardware clock reaches ``hw_tick`` (jittered edge)."""
    return (hw_tick - clock.bias - clock.jitter()) / clock.freq_scale


def advance(clock: ClockState, dt_true: float) -> ClockState:
    """Return ``clock`` after ``dt_true`` seconds of true time.

    The dynamic bias takes one Gaussian step with variance
    ``drift_diffusion * dt_true``; everything else is carried over.
    """
    if not dt_true > 0:
        raise ValueError(f"dt_true must be positive, got {dt_true!r}")
    if clock.drift_diffusion <= 0.0:
        return replace(clock)
    step = clock.rng.normal(0.0, np.sqrt(clock.drift_diffusion * dt_true))
    return replace(clock, dynamic_bias=clock.dynamic_bias + float(step))


def true_offset(clock_i: ClockState, clock_j: ClockState, t_true: float = 0.0) -> float:
    """Ground-truth offset of clock j relative to clock i (jitter excluded).

    Positive when j reads ahead of i, matching the sign of the two-way
    transfer estimate.
    """
    return clock_j.offset(t_true) - clock_i.offset(t_true)


def init_clocks(
    n: int,
    rng: np.random.Generator,
    *,
    bias_range: float = DEFAULT_BIAS_RANGE,
    drift_diffusion: float = DEFAULT_DRIFT_DIFFUSION,
    jitter_std: float = 0.0,
    freq_offset_ppb: float = 0.0,
) -> list[ClockState]:
    """Draw ``n`` clocks with uniform static biases in +-``bias_range``.

    Each clock gets its own generator spawned from ``rng`` so per-node draws
    do not depend on how many draws other nodes make. A nonzero
    ``freq_offset_ppb`` gives each node a residual frequency error drawn
    uniformly in +-``freq_offset_ppb``.
    """
    if n < 1:
        raise ValueError("need at least one clock")
    biases = rng.uniform(-bias_range, bias_range, size=n)
    if freq_offset_ppb:
        scales = 1.0 + 1e-9 * rng.uniform(-freq_offset_ppb, freq_offset_ppb, size=n)
    else:
        scales = np.ones(n)
    streams = rng.spawn(n)
    return [
        ClockState(
            node_id=i,
            static_bias=float(biases[i]),
            drift_diffusion=drift_diffusion,
            jitter_std=jitter_std,
            freq_scale=float(scales[i]),
            rng=streams[i],
        )
        for i in range(n)
    ]
