"""Time-of-arrival estimation: matched filter, QLS refinement, bias LUT.

The estimator runs in two stages. A matched filter locates the pulse to the
nearest sample and a three-point parabola (QLS) through the filter magnitude
refines it. The parabola's systematic error is a fixed function of the
fractional delay, so it is tabulated once per waveform and subtracted.

Two-tone matched-filter magnitudes are lobed (one lobe every
``sample_rate / tone_separation`` samples). Neighbouring lobes differ in
height only through the slow triangular taper of the autocorrelation, so the
lobe is chosen on a band-limited quarter-sample grid before the sample-level
QLS runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .channel import fractional_delay
from .waveform import TwoToneWaveform

log = logging.getLogger(__name__)

DETECTION_THRESHOLD_DB = 13.0
DEFAULT_GUARD = 256
DEFAULT_LUT_GRID = 256
_FINE = 4  # sub-sample phases used for lobe selection
_EDGE_MARGIN = 32  # samples around the pulse left out of the noise estimate


class MissedPulse(RuntimeError):
    """No matched-filter peak cleared the detection threshold."""


class QlsFit(NamedTuple):
    offset: float
    degenerate: bool


def window_length(template_len: int, guard: int = DEFAULT_GUARD) -> int:
    """Receive window holding the pulse after ``guard`` samples plus a noise-only tail."""
    return 2 * template_len + 2 * guard


class MatchedFilter:
    """FFT correlator for one template and one receive-window length."""

    def __init__(self, template: TwoToneWaveform, window_len: int):
        n = len(template)
        if n > window_len:
            raise ValueError(f"template ({n}) longer than receive window ({window_len})")
        self.template = template
        self.window_len = window_len
        self.n_lags = window_len - n + 1
        self.nfft = sfft.next_fast_len(window_len + n - 1)
        self._tconj = np.conj(sfft.fft(template.samples, self.nfft))

    @cached_property
    def _ramps(self) -> np.ndarray:
        k = sfft.fftfreq(self.nfft) * self.nfft
        steps = np.arange(1, _FINE) / _FINE
        return np.exp(2j * np.pi * np.outer(steps, k) / self.nfft)

    def spectrum(self, rx: np.ndarray) -> np.ndarray:
        if len(rx) != self.window_len:
            raise ValueError(f"expected {self.window_len} samples, got {len(rx)}")
        return sfft.fft(rx, self.nfft) * self._tconj

    def magnitude(self, spec: np.ndarray) -> np.ndarray:
        return np.abs(sfft.ifft(spec)[: self.n_lags])

    def fine_magnitude(self, spec: np.ndarray, coarse: np.ndarray) -> np.ndarray:
        """Magnitude on a 1/_FINE-sample lag grid (band-limited interpolation)."""
        shifted = np.abs(sfft.ifft(spec * self._ramps, axis=-1)[:, : self.n_lags])
        return np.vstack([coarse, shifted]).T.ravel()


def matched_filter(rx: np.ndarray, template: TwoToneWaveform) -> np.ndarray:
    """|rx correlated with the conjugated template| at every full-overlap lag."""
    rx = np.asarray(rx, dtype=complex)
    if len(template) > len(rx):
        raise ValueError("template longer than received samples")
    mf = MatchedFilter(template, len(rx))
    return mf.magnitude(mf.spectrum(rx))


def qls_vertex(y_minus: float, y_0: float, y_plus: float) -> QlsFit:
    """Vertex offset (in samples) of the parabola through three equally spaced points."""
    denom = y_minus - 2.0 * y_0 + y_plus
    if denom == 0.0:
        return QlsFit(0.0, True)
    return QlsFit(0.5 * (y_minus - y_plus) / denom, False)


def qls_refine(mf: np.ndarray, n_max: int, sample_period: float) -> QlsFit:
    """Sub-sample correction (seconds) to add to ``n_max * sample_period``."""
    if not 1 <= n_max <= len(mf) - 2:
        raise ValueError(f"peak index {n_max} is at the edge of a {len(mf)}-lag window")
    fit = qls_vertex(mf[n_max - 1], mf[n_max], mf[n_max + 1])
    return QlsFit(fit.offset * sample_period, fit.degenerate)


def _vertex_height(y_minus: float, y_0: float, y_plus: float) -> float:
    denom = y_minus - 2.0 * y_0 + y_plus
    if denom >= 0.0:
        return y_0
    return y_0 - (y_minus - y_plus) ** 2 / (8.0 * denom)


def _lobe_spacing(template: TwoToneWaveform) -> float:
    if template.tone_separation <= 0:
        return np.inf
    return template.sample_rate / template.tone_separation


@dataclass
class _Peak:
    index: int  # sample index of the largest sample in the chosen lobe
    position: float  # lobe peak position in samples (quarter-grid refined)
    height: float


def _find_peak(fine: np.ndarray, mf: np.ndarray, spacing: float) -> _Peak:
    g = int(np.argmax(fine))
    reach = int(np.ceil((min(spacing, 0.25 * len(mf)) + 1) * _FINE))
    lo, hi = max(g - reach, 1), min(g + reach, len(fine) - 2)
    seg = fine[lo - 1 : hi + 2]
    # local maxima of the fine grid near the global maximum are lobe candidates
    inner = seg[1:-1]
    is_max = (inner >= seg[:-2]) & (inner >= seg[2:]) & (inner > 0.5 * fine[g])
    best_pos, best_h = g / _FINE, fine[g]
    for c in np.flatnonzero(is_max) + lo:
        h = _vertex_height(fine[c - 1], fine[c], fine[c + 1])
        if h > best_h:
            best_h = h
            best_pos = (c + qls_vertex(fine[c - 1], fine[c], fine[c + 1]).offset) / _FINE
    lo_n = int(np.clip(np.floor(best_pos), 0, len(mf) - 1))
    hi_n = min(lo_n + 1, len(mf) - 1)
    n_max = hi_n if mf[hi_n] > mf[lo_n] else lo_n
    return _Peak(n_max, best_pos, best_h)


@dataclass(frozen=True)
class BiasLut:
    """Noiseless QLS error versus true fractional delay for one waveform."""

    fractional_delays: np.ndarray
    residual_bias: np.ndarray  # seconds
    waveform_descriptor: tuple[float, float, float, float]

    @property
    def sample_period(self) -> float:
        return 1.0 / self.waveform_descriptor[1]

    @property
    def max_abs_bias(self) -> float:
        return float(np.max(np.abs(self.residual_bias)))

    @cached_property
    def _by_estimate(self) -> tuple[np.ndarray, np.ndarray]:
        # tabulate bias against the position the QLS reports, closing the
        # period so lookups near +-0.5 interpolate across the wrap
        est = self.fractional_delays + self.residual_bias / self.sample_period
        order = np.argsort(est)
        est, bias = est[order], self.residual_bias[order]
        est = np.concatenate([est[-1:] - 1.0, est, est[:1] + 1.0])
        bias = np.concatenate([bias[-1:], bias, bias[:1]])
        return est, bias

    def correction(self, estimated_fraction: float) -> float:
        """Bias (seconds) to subtract at a QLS-estimated fractional position."""
        est, bias = self._by_estimate
        return float(np.interp(estimated_fraction, est, bias))

    def matches(self, template: TwoToneWaveform) -> bool:
        return tuple(self.waveform_descriptor) == template.descriptor

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            fractional_delays=self.fractional_delays,
            residual_bias=self.residual_bias,
            descriptor=np.asarray(self.waveform_descriptor, dtype=float),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BiasLut":
        with np.load(path) as z:
            return cls(
                z["fractional_delays"].copy(),
                z["residual_bias"].copy(),
                tuple(float(v) for v in z["descriptor"]),
            )


@dataclass(frozen=True)
class ToaEstimate:
    toa: float  # seconds from window start
    peak_index: int
    peak_value: float
    snr_estimate_db: float
    raw_toa: float = field(default=np.nan, compare=False)  # before LUT correction


def _noise_power(rx: np.ndarray, start: int, n: int) -> float:
    """Per-sample noise power from the samples outside ``[start, start + n)``.

    Raw samples are white, unlike the matched-filter output whose noise is
    correlated over the template length, so a plain mean is well conditioned.
    """
    keep = np.ones(len(rx), dtype=bool)
    keep[max(start - _EDGE_MARGIN, 0) : start + n + _EDGE_MARGIN] = False
    if keep.sum() < _EDGE_MARGIN:
        keep[:] = True
    return float(np.mean(np.abs(rx[keep]) ** 2))


def _raw_estimate(
    rx: np.ndarray, plan: MatchedFilter, detection_threshold_db: float | None
) -> tuple[_Peak, float, float, np.ndarray]:
    spec = plan.spectrum(rx)
    mf = plan.magnitude(spec)
    fine = plan.fine_magnitude(spec, mf)
    peak = _find_peak(fine, mf, _lobe_spacing(plan.template))
    if not 1 <= peak.index <= len(mf) - 2:
        raise MissedPulse(f"peak at lag {peak.index} touches the window edge")
    frac = qls_vertex(mf[peak.index - 1], mf[peak.index], mf[peak.index + 1]).offset

    n = len(plan.template)
    noise_mean = _noise_power(rx, peak.index, n) * plan.template.energy
    peak_power = peak.height**2
    if detection_threshold_db is not None and noise_mean > 0:
        if peak_power < noise_mean * 10.0 ** (detection_threshold_db / 10.0):
            raise MissedPulse(
                f"peak {10 * np.log10(peak_power / noise_mean):.1f} dB above mean floor, "
                f"threshold {detection_threshold_db:.1f} dB"
            )
    if noise_mean > 0:
        snr = max(peak_power - noise_mean, 1e-300) / (noise_mean * n)
        snr_db = 10.0 * np.log10(snr)
    else:
        snr_db = np.inf
    return peak, frac, snr_db, mf


def build_bias_lut(
    template: TwoToneWaveform,
    grid_size: int = DEFAULT_LUT_GRID,
    *,
    guard: int = DEFAULT_GUARD,
) -> BiasLut:
    """Tabulate the noiseless QLS error on a uniform grid over [-0.5, 0.5) samples."""
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    win = window_length(len(template), guard)
    plan = MatchedFilter(template, win)
    base = np.zeros(win, dtype=complex)
    base[: len(template)] = template.samples
    grid = -0.5 + np.arange(grid_size) / grid_size
    ts = template.sample_period
    bias = np.empty(grid_size)
    for i, d in enumerate(grid):
        rx = fractional_delay(base, guard + d)
        peak, frac, _, _ = _raw_estimate(rx, plan, None)
        bias[i] = ((peak.index + frac) - (guard + d)) * ts
    return BiasLut(grid, bias, template.descriptor)


def load_or_build_lut(
    template: TwoToneWaveform,
    cache_dir: str | Path | None = None,
    grid_size: int = DEFAULT_LUT_GRID,
    *,
    guard: int = DEFAULT_GUARD,
) -> BiasLut:
    """Return a cached LUT for ``template``, rebuilding it if the key differs."""
    if cache_dir is None:
        return build_bias_lut(template, grid_size, guard=guard)
    sep, fs, tp, rf = template.descriptor
    name = f"lut_{sep:.6g}_{fs:.6g}_{tp:.6g}_{rf:.6g}_{grid_size}_{guard}.npz"
    path = Path(cache_dir) / name
    if path.exists():
        try:
            lut = BiasLut.load(path)
            if lut.matches(template) and len(lut.fractional_delays) == grid_size:
                return lut
            log.info("LUT cache %s does not match waveform; rebuilding", path)
        except (OSError, KeyError, ValueError):
            log.warning("unreadable LUT cache %s; rebuilding", path)
    lut = build_bias_lut(template, grid_size, guard=guard)
    path.parent.mkdir(parents=True, exist_ok=True)
    lut.save(path)
    return lut


def estimate_toa(
    rx: np.ndarray,
    template: TwoToneWaveform,
    lut: BiasLut | None,
    sample_period: float | None = None,
    *,
    detection_threshold_db: float | None = DETECTION_THRESHOLD_DB,
    plan: MatchedFilter | None = None,
) -> ToaEstimate:
    """Estimate when the pulse starts, in seconds after the first sample of ``rx``.

    Raises :class:`MissedPulse` when no peak clears the detection threshold
    over the mean matched-filter noise power, which is estimated from the
    receive samples outside the detected pulse.
    """
    ts = template.sample_period if sample_period is None else sample_period
    if lut is not None and not lut.matches(template):
        raise ValueError("bias LUT was built for a different waveform")
    if plan is None:
        plan = MatchedFilter(template, len(rx))
    peak, frac, snr_db, _ = _raw_estimate(np.asarray(rx), plan, detection_threshold_db)
    raw = (peak.index + frac) * ts
    toa = raw - (lut.correction(frac) if lut is not None else 0.0)
    return ToaEstimate(
        toa=toa,
        peak_index=peak.index,
        peak_value=peak.height,
        snr_estimate_db=float(snr_db),
        raw_toa=raw,
    )
