import numpy as np
import pytest

from picosync.channel import (
    SPEED_OF_LIGHT,
    LinkChannel,
    WindowOverflow,
    complex_awgn,
    fractional_delay,
    noise_std,
    propagate,
)
from picosync.estimation import estimate_toa, matched_filter

TS = 5e-9


def quiet_channel(**kw):
    kw.setdefault("carrier_freq", 0.0)
    return LinkChannel((0, 1), 0.0, 36.0, **kw)


def test_integer_delay_is_pure_shift(waveform):
    rx = propagate(waveform, quiet_channel(), 17 * TS, None, 4500, noise=False)
    np.testing.assert_allclose(rx[17 : 17 + 2000], waveform.samples, atol=1e-9)
    assert np.max(np.abs(rx[:17])) < 1e-9
    assert int(np.argmax(matched_filter(rx, waveform))) == 17


def test_fractional_delay_round_trip(waveform, lut):
    rx = propagate(waveform, quiet_channel(), 3.5 * TS, None, 4512, noise=False)
    est = estimate_toa(rx, waveform, lut)
    assert abs(est.toa - 3.5 * TS) < 1e-12


def test_fractional_delay_composes():
    x = np.random.default_rng(0).standard_normal(64) + 0j
    np.testing.assert_allclose(fractional_delay(fractional_delay(x, 1.25), 0.75), np.roll(x, 2), atol=1e-12)


def test_carrier_rotation(waveform):
    ch = LinkChannel((0, 1), 0.0, 36.0, carrier_freq=1.9e9)
    delay = 10 * TS + 0.13e-9
    a = propagate(waveform, ch, delay, None, 4500, noise=False)
    b = propagate(waveform, quiet_channel(), delay, None, 4500, noise=False)
    np.testing.assert_allclose(a, b * np.exp(-2j * np.pi * 1.9e9 * delay), atol=1e-12)


def test_noise_calibration(waveform):
    ch = LinkChannel((0, 1), 0.0, 36.0)
    rx = propagate(waveform, ch, 0.0, np.random.default_rng(5), 1_000_000)
    ratio_db = 10 * np.log10(np.var(rx[5000:]) / waveform.mean_power)
    assert ratio_db == pytest.approx(-36.0, abs=0.5)


def test_awgn_is_circular():
    z = complex_awgn(np.random.default_rng(0), 200_000, 2.0)
    assert np.var(z.real) == pytest.approx(2.0, rel=0.02)
    assert np.var(z.imag) == pytest.approx(2.0, rel=0.02)
    assert noise_std.__name__ == "noise_std"


def test_window_overflow(waveform):
    with pytest.raises(WindowOverflow):
        propagate(waveform, quiet_channel(), -1e-9, None, 4500, noise=False)
    with pytest.raises(WindowOverflow):
        propagate(waveform, quiet_channel(), 3000 * TS, None, 4500, noise=False)


def test_noise_requires_generator(waveform):
    with pytest.raises(ValueError):
        propagate(waveform, quiet_channel(), 0.0, None, 4500)


def test_link_channel_normalises_and_validates():
    assert LinkChannel((3, 1), 1e-9, 30.0).node_pair == (1, 3)
    with pytest.raises(ValueError):
        LinkChannel((1, 1), 0.0, 30.0)
    with pytest.raises(ValueError):
        LinkChannel((0, 1), -1e-9, 30.0)


def test_from_positions():
    ch = LinkChannel.from_positions(0, 1, [0, 0], [3, 4], 30.0)
    assert ch.propagation_delay == pytest.approx(5 / SPEED_OF_LIGHT)
