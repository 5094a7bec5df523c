import numpy as np
import pytest
import scipy.fft as sfft
from hypothesis import given, settings
from hypothesis import strategies as st

from picosync.waveform import (
    crlb_variance,
    es_over_n0,
    generate_two_tone,
    mean_square_bandwidth,
    network_crlb,
    raised_cosine_envelope,
    waveform_crlb_std,
)

FS = 200e6


def test_table_waveform_length_and_tones(waveform):
    assert len(waveform.samples) == 2000
    spec = np.abs(sfft.fftshift(sfft.fft(waveform.samples, 2**16)))
    freqs = sfft.fftshift(sfft.fftfreq(2**16, 1 / FS))
    pos = freqs > 0
    assert freqs[pos][np.argmax(spec[pos])] == pytest.approx(20e6, abs=FS / 2**16)
    assert freqs[~pos][np.argmax(spec[~pos])] == pytest.approx(-20e6, abs=FS / 2**16)


def test_zero_separation_is_dc_pulse():
    w = generate_two_tone(0.0, 10e-6, 5e-9, FS)
    np.testing.assert_allclose(w.samples.imag, 0, atol=1e-15)
    assert np.allclose(w.samples[10:-10], 1.0)


def test_phase_does_not_change_power_spectrum():
    a = generate_two_tone(40e6, 10e-6, 5e-9, FS, phase=0.0)
    b = generate_two_tone(40e6, 10e-6, 5e-9, FS, phase=np.pi / 2)
    np.testing.assert_allclose(np.abs(sfft.fft(a.samples)), np.abs(sfft.fft(b.samples)), atol=1e-9)


def test_envelope_shape():
    env = raised_cosine_envelope(20, 4)
    assert np.all((env > 0) & (env <= 1))
    assert np.all(np.diff(env[:5]) > 0)
    np.testing.assert_allclose(env, env[::-1])
    assert np.all(env[4:16] == 1.0)


@pytest.mark.parametrize(
    "args",
    [(200e6, 10e-6, 5e-9, FS), (-1.0, 10e-6, 5e-9, FS), (40e6, 10e-9, 5e-9, FS), (40e6, 10e-6, -1e-9, FS)],
)
def test_invalid_arguments(args):
    with pytest.raises(ValueError):
        generate_two_tone(*args)


def test_msb_two_tone_closed_form(waveform):
    assert mean_square_bandwidth(waveform) == pytest.approx((2 * np.pi * 20e6) ** 2, rel=0.01)


def test_msb_dc_pulse_is_small():
    w = generate_two_tone(0.0, 10e-6, 5e-9, FS)
    assert mean_square_bandwidth(w) < 1e-2 * (2 * np.pi * 20e6) ** 2


def test_msb_quadruples_with_double_separation():
    a = mean_square_bandwidth(generate_two_tone(20e6, 10e-6, 5e-9, FS))
    b = mean_square_bandwidth(generate_two_tone(40e6, 10e-6, 5e-9, FS))
    assert b / a == pytest.approx(4.0, rel=0.01)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 500), st.floats(0, 2 * np.pi))
def test_msb_shift_and_rotation_invariant(shift, phase):
    w = generate_two_tone(30e6, 2e-6, 5e-9, FS)
    ref = mean_square_bandwidth(w)
    x = np.concatenate([np.zeros(shift), w.samples]) * np.exp(1j * phase)
    assert mean_square_bandwidth(x, FS) == pytest.approx(ref, rel=1e-9)


def test_msb_errors():
    with pytest.raises(ValueError):
        mean_square_bandwidth(np.zeros(8), FS)
    with pytest.raises(ValueError):
        mean_square_bandwidth(np.zeros(0), FS)
    with pytest.raises(TypeError):
        mean_square_bandwidth(np.ones(8))


def test_crlb_reference_value():
    std = np.sqrt(crlb_variance((2 * np.pi * 20e6) ** 2, 10**6.9))
    assert std == pytest.approx(2.0e-12, rel=0.01)


def test_es_over_n0_time_bandwidth_gain():
    assert 10 * np.log10(es_over_n0(36.0, 10e-6, FS)) == pytest.approx(69.01, abs=0.01)


def test_crlb_scaling():
    v = crlb_variance(1e16, 1e6)
    assert crlb_variance(1e16, 4e6) == pytest.approx(v / 4)
    assert crlb_variance(4e16, 1e6) == pytest.approx(v / 4)


@given(st.floats(1e10, 1e20), st.floats(1.0, 1e10), st.floats(1.01, 10))
def test_crlb_strictly_decreasing(msb, esn0, k):
    v = crlb_variance(msb, esn0)
    assert crlb_variance(msb * k, esn0) < v
    assert crlb_variance(msb, esn0 * k) < v


@pytest.mark.parametrize("msb,esn0", [(0, 1), (1, 0), (-1, 1)])
def test_crlb_rejects_nonpositive(msb, esn0):
    with pytest.raises(ValueError):
        crlb_variance(msb, esn0)


def test_network_crlb():
    assert network_crlb([5e-24] * 6) == pytest.approx(5e-24)
    assert network_crlb([1e-24, 3e-24]) == pytest.approx(2e-24)
    with pytest.raises(ValueError):
        network_crlb([])


def test_network_crlb_composes_link_bounds(waveform):
    snrs = [28.0, 30.5, 33.0, 34.2, 35.1, 36.0]
    msb = mean_square_bandwidth(waveform)
    parts = [crlb_variance(msb, es_over_n0(s, 10e-6, FS)) for s in snrs]
    assert network_crlb(parts) == pytest.approx(np.mean(parts))
    assert waveform_crlb_std(waveform, 36.0) == pytest.approx(np.sqrt(parts[-1]))


def test_energy_matches_envelope(waveform):
    assert waveform.energy == pytest.approx(np.sum(np.abs(waveform.samples) ** 2))
    assert 0.49 < waveform.mean_power < 0.51  # cos^2 average
