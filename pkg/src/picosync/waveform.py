"""Pulsed two-tone delay-estimation waveform and delay-accuracy bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class TwoToneWaveform:
    samples: np.ndarray
    sample_rate: float
    tone_separation: float
    pulse_duration: float
    rise_fall_time: float
    phase: float = 0.0

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def mean_power(self) -> float:
        return self.energy / len(self.samples)

    @property
    def descriptor(self) -> tuple[float, float, float, float]:
        """Key identifying everything the delay-estimation bias depends on."""
        return (
            float(self.tone_separation),
            float(self.sample_rate),
            float(self.pulse_duration),
            float(self.rise_fall_time),
        )


def raised_cosine_envelope(n_samples: int, n_ramp: int) -> np.ndarray:
    """Unit-height envelope with raised-cosine ramps of ``n_ramp`` samples."""
    env = np.ones(n_samples)
    if n_ramp > 0:
        m = np.arange(n_ramp)
        ramp = 0.5 * (1.0 - np.cos(np.pi * (m + 1) / (n_ramp + 1)))
        env[:n_ramp] = ramp
        env[n_samples - n_ramp :] = ramp[::-1]
    return env


def generate_two_tone(
    tone_separation: float,
    pulse_duration: float,
    rise_fall: float,
    sample_rate: float,
    phase: float = 0.0,
) -> TwoToneWaveform:
    """Build the complex baseband pulse ``env * cos(pi * sep * t) * exp(j*phase)``.

    This is the average of two unit phasors at +-sep/2, so its spectrum holds
    two equal-power tones. The envelope ramps up and down over ``rise_fall``
    seconds (at least one sample when ``rise_fall > 0``).
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    if tone_separation < 0 or tone_separation >= sample_rate:
        raise ValueError(
            f"tone separation {tone_separation:g} Hz must lie in [0, sample_rate)"
        )
    if rise_fall < 0 or pulse_duration <= 2 * rise_fall:
        raise ValueError("pulse_duration must exceed twice the rise/fall time")
    n = int(round(pulse_duration * sample_rate))
    n_ramp = int(round(rise_fall * sample_rate))
    if rise_fall > 0:
        n_ramp = max(n_ramp, 1)
    if n <= 2 * n_ramp:
        raise ValueError("pulse too short for its rise/fall ramps at this sample rate")
    t = np.arange(n) / sample_rate
    half = 0.5 * tone_separation
    tones = 0.5 * (
        np.exp(1j * (-2 * np.pi * half * t + phase))
        + np.exp(1j * (2 * np.pi * half * t + phase))
    )
    samples = raised_cosine_envelope(n, n_ramp) * tones
    return TwoToneWaveform(
        samples=samples,
        sample_rate=float(sample_rate),
        tone_separation=float(tone_separation),
        pulse_duration=float(pulse_duration),
        rise_fall_time=float(rise_fall),
        phase=float(phase),
    )


def mean_square_bandwidth(w: TwoToneWaveform | np.ndarray, sample_rate: float | None = None) -> float:
    """Second moment of the power spectrum about DC, in rad^2/s^2.

    The spectrum is taken on a zero-padded DFT so the pulse is not wrapped
    onto itself.
    """
    if isinstance(w, TwoToneWaveform):
        x, fs = w.samples, w.sample_rate
    else:
        if sample_rate is None:
            raise TypeError("sample_rate is required for a bare sample array")
        x, fs = np.asarray(w), sample_rate
    if x.size == 0:
        raise ValueError("empty waveform")
    nfft = sfft.next_fast_len(2 * x.size)
    power = np.abs(sfft.fft(x, nfft)) ** 2
    total = power.sum()
    if total == 0:
        raise ValueError("all-zero waveform has no defined bandwidth")
    omega = 2 * np.pi * sfft.fftfreq(nfft, d=1.0 / fs)
    return float(np.sum(omega**2 * power) / total)


def es_over_n0(snr_db: float, pulse_duration: float, sample_rate: float) -> float:
    """Convert per-sample SNR (dB) to matched-filter E_s/N_0.

    The per-sample SNR is signal power over noise power in the full sampled
    bandwidth, so the matched filter gains the time-bandwidth product
    ``pulse_duration * sample_rate``.
    """
    return 10.0 ** (snr_db / 10.0) * pulse_duration * sample_rate


def crlb_variance(msb: float, es_over_n0: float) -> float:
    """Cramér-Rao bound on delay variance, ``1 / (2 * msb * Es/N0)`` in s^2."""
    if msb <= 0 or es_over_n0 <= 0:
        raise ValueError("bandwidth and Es/N0 must both be positive")
    return 1.0 / (2.0 * msb * es_over_n0)


def network_crlb(link_variances: Sequence[float]) -> float:
    """Average of per-link delay bounds; the network-level reference variance."""
    v = np.asarray(link_variances, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one link")
    return float(v.mean())


def waveform_crlb_std(w: TwoToneWaveform, snr_db: float) -> float:
    """Single-link delay bound (std, seconds) for ``w`` at per-sample ``snr_db``."""
    esn0 = es_over_n0(snr_db, len(w) / w.sample_rate, w.sample_rate)
    return float(np.sqrt(crlb_variance(mean_square_bandwidth(w), esn0)))
