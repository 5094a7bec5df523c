"""Reciprocal quasi-static link: delay, carrier rotation and AWGN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .waveform import TwoToneWaveform

SPEED_OF_LIGHT = 299_792_458.0


class WindowOverflow(RuntimeError):
    """Pulse does not fit the receive window (coarse alignment lost)."""


@dataclass(frozen=True)
class LinkChannel:
    node_pair: tuple[int, int]
    propagation_delay: float
    snr_db: float
    carrier_freq: float = 1.9e9

    def __post_init__(self):
        i, j = self.node_pair
        if i == j:
            raise ValueError("a link needs two distinct nodes")
        if self.propagation_delay < 0:
            raise ValueError("propagation delay must be non-negative")
        object.__setattr__(self, "node_pair", (min(i, j), max(i, j)))

    @classmethod
    def from_positions(cls, i, j, pos_i, pos_j, snr_db, carrier_freq=1.9e9):
        dist = float(np.linalg.norm(np.asarray(pos_i, float) - np.asarray(pos_j, float)))
        return cls((i, j), dist / SPEED_OF_LIGHT, snr_db, carrier_freq)


def fractional_delay(x: np.ndarray, delay_samples: float) -> np.ndarray:
    """Circularly delay ``x`` by a real number of samples.

    Applied as a linear phase ramp on the DFT, which is exact for the
    periodic band-limited interpolant of ``x``.
    """
    x = np.asarray(x, dtype=complex)
    k = sfft.fftfreq(x.size)
    return sfft.ifft(sfft.fft(x) * np.exp(-2j * np.pi * k * delay_samples))


def noise_std(w: TwoToneWaveform, snr_db: float) -> float:
    """Complex noise std giving per-sample SNR ``snr_db`` during the pulse."""
    return float(np.sqrt(w.mean_power / 10.0 ** (snr_db / 10.0)))


def complex_awgn(rng: np.random.Generator, n: int, std: float) -> np.ndarray:
    return std / np.sqrt(2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def propagate(
    w: TwoToneWaveform,
    ch: LinkChannel,
    delay: float,
    rng: np.random.Generator | None,
    window_len: int,
    *,
    noise: bool = True,
) -> np.ndarray:
    """Received window of ``window_len`` samples starting at the window open.

    ``delay`` is the pulse arrival time in seconds after the window opens.
    The pulse is rotated by the carrier phase of that delay and, unless
    ``noise`` is off, buried in complex white noise at the link SNR.
    """
    n = len(w)
    d = delay * w.sample_rate
    if delay < 0 or d + n > window_len:
        raise WindowOverflow(
            f"pulse at {d:.2f} samples does not fit a {window_len}-sample window"
        )
    x = np.zeros(window_len, dtype=complex)
    x[:n] = w.samples
    rx = fractional_delay(x, d) * np.exp(-2j * np.pi * ch.carrier_freq * delay)
    if noise:
        if rng is None:
            raise ValueError("a generator is required when noise is enabled")
        rx = rx + complex_awgn(rng, window_len, noise_std(w, ch.snr_db))
    return rx
