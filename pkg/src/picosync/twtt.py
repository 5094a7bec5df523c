"""Two-way time transfer between a pair of nodes.

Node i transmits on one of its hardware clock edges; node j records the
arrival against its own clock, waits, and answers on one of its edges. The
four timestamps give the clock offset with the reciprocal propagation delay
cancelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkChannel, WindowOverflow, propagate
from .clock import ClockState, edge_true_time
from .estimation import (
    DEFAULT_GUARD,
    DETECTION_THRESHOLD_DB,
    BiasLut,
    MatchedFilter,
    MissedPulse,
    estimate_toa,
    window_length,
)
from .waveform import TwoToneWaveform

DEFAULT_TURNAROUND = 50e-6  # s between the two transmissions of one exchange


class ExchangeFailed(RuntimeError):
    """The exchange produced no usable timestamps (missed pulse or misalignment)."""


class ProtocolFault(RuntimeError):
    """Timestamps imply a clearly negative propagation delay."""


@dataclass(frozen=True)
class TimestampQuad:
    t_tx_i: float
    t_rx_j: float
    t_tx_j: float
    t_rx_i: float

    @property
    def forward_flight(self) -> float:
        return self.t_rx_j - self.t_tx_i

    @property
    def reverse_flight(self) -> float:
        return self.t_rx_i - self.t_tx_j


def compute_offset(q: TimestampQuad) -> float:
    """Clock offset of j relative to i; positive when j reads ahead."""
    return 0.5 * (q.forward_flight - q.reverse_flight)


def compute_propagation_delay(q: TimestampQuad, tolerance: float = 1e-9) -> float:
    """Mean of the two apparent flight times.

    Raises :class:`ProtocolFault` if the result is below ``-tolerance``.
    """
    tau = 0.5 * (q.forward_flight + q.reverse_flight)
    if tau < -tolerance:
        raise ProtocolFault(f"propagation delay {tau:.3e} s is negative")
    return tau


@dataclass(frozen=True)
class Transmission:
    """One half-duplex burst, in true time, for slot bookkeeping."""

    tx_node: int
    rx_node: int
    start: float
    end: float


@dataclass(frozen=True)
class ExchangeResult:
    quad: TimestampQuad
    snr_estimates_db: tuple[float, float]  # at j, then at i
    transmissions: tuple[Transmission, Transmission]

    @property
    def offset(self) -> float:
        return compute_offset(self.quad)


class Transceiver:
    """Waveform, LUT and receive-window geometry shared by every exchange."""

    def __init__(
        self,
        waveform: TwoToneWaveform,
        lut: BiasLut | None,
        *,
        guard: int = DEFAULT_GUARD,
        detection_threshold_db: float | None = DETECTION_THRESHOLD_DB,
        noise: bool = True,
    ):
        self.waveform = waveform
        self.lut = lut
        self.guard = guard
        self.window_len = window_length(len(waveform), guard)
        self.plan = MatchedFilter(waveform, self.window_len)
        self.detection_threshold_db = detection_threshold_db
        self.noise = noise

    @property
    def sample_period(self) -> float:
        return self.waveform.sample_period

    def one_way(
        self,
        tx: ClockState,
        rx: ClockState,
        ch: LinkChannel,
        slot_time: float,
        rng: np.random.Generator | None,
    ) -> tuple[float, float, float, Transmission]:
        """Send one pulse at network time ``slot_time``.

        Returns the TX timestamp (tx clock), RX timestamp (rx clock), the
        receiver's SNR estimate and the burst's true-time extent.
        """
        ts = self.sample_period
        tick_tx = math.ceil((slot_time - tx.software_correction) / ts) * ts
        t_tx = tick_tx + tx.software_correction
        tx_true = edge_true_time(tx, tick_tx)

        tick_rx = math.ceil((slot_time - self.guard * ts - rx.software_correction) / ts) * ts
        window_start = tick_rx + rx.software_correction
        window_true = edge_true_time(rx, tick_rx)

        arrival = tx_true + ch.propagation_delay - window_true
        try:
            samples = propagate(self.waveform, ch, arrival, rng, self.window_len, noise=self.noise)
            est = estimate_toa(
                samples,
                self.waveform,
                self.lut,
                ts,
                detection_threshold_db=self.detection_threshold_db,
                plan=self.plan,
            )
        except (WindowOverflow, MissedPulse) as exc:
            raise ExchangeFailed(f"{tx.node_id}->{rx.node_id}: {exc}") from exc
        burst = Transmission(tx.node_id, rx.node_id, tx_true, tx_true + len(self.waveform) * ts)
        return t_tx, window_start + est.toa, est.snr_estimate_db, burst


def exchange(
    clock_i: ClockState,
    clock_j: ClockState,
    ch: LinkChannel,
    transceiver: Transceiver,
    epoch_time: float,
    rng: np.random.Generator | None = None,
    *,
    turnaround: float = DEFAULT_TURNAROUND,
) -> ExchangeResult:
    """Run i -> j then j -> i and collect the four timestamps.

    ``epoch_time`` is the slot start in network (software) time; node j
    answers ``turnaround`` seconds later. The turnaround never enters the
    offset, only the schedule.
    """
    if clock_i.node_id == clock_j.node_id:
        raise ValueError("a node cannot exchange with itself")
    t_tx_i, t_rx_j, snr_j, fwd = transceiver.one_way(clock_i, clock_j, ch, epoch_time, rng)
    t_tx_j, t_rx_i, snr_i, rev = transceiver.one_way(
        clock_j, clock_i, ch, epoch_time + turnaround, rng
    )
    return ExchangeResult(
        TimestampQuad(t_tx_i, t_rx_j, t_tx_j, t_rx_i), (snr_j, snr_i), (fwd, rev)
    )
