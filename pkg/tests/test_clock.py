import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from picosync.clock import ClockState, advance, init_clocks, local_time, true_offset


def test_identity_clock():
    assert local_time(ClockState(0), 1.0) == 1.0


def test_static_bias_adds():
    assert local_time(ClockState(0, static_bias=40e-9), 1.0) == pytest.approx(1.000000040, abs=1e-15)


def test_software_correction_enters_local_time():
    c = ClockState(0, static_bias=5e-9, software_correction=-5e-9)
    assert local_time(c, 2.0) == pytest.approx(2.0, abs=1e-15)


def test_random_walk_std_matches_closed_form():
    rng = np.random.default_rng(0)
    steps = []
    for s in rng.spawn(10_000):
        c = advance(ClockState(0, drift_diffusion=1e-24, rng=s), 0.2)
        steps.append(c.dynamic_bias)
    expected = np.sqrt(1e-24 * 0.2)  # 0.447 ps
    assert np.std(steps) == pytest.approx(expected, rel=0.03)


def test_zero_diffusion_leaves_bias():
    c = ClockState(0, static_bias=1e-9, dynamic_bias=2e-12)
    assert advance(c, 0.5).dynamic_bias == 2e-12


def test_increment_std_for_half_second():
    c0 = ClockState(0, drift_diffusion=4e-24, rng=np.random.default_rng(3))
    draws = []
    c = c0
    for _ in range(20_000):
        nxt = advance(c, 0.5)
        draws.append(nxt.dynamic_bias - c.dynamic_bias)
        c = nxt
    assert np.std(draws) == pytest.approx(np.sqrt(2e-24), rel=0.03)


def test_two_steps_match_one_double_step():
    a = [advance(advance(ClockState(0, drift_diffusion=1e-24, rng=np.random.default_rng(s)), 0.1), 0.1).dynamic_bias
         for s in range(8000)]
    b = [advance(ClockState(0, drift_diffusion=1e-24, rng=np.random.default_rng(10**6 + s)), 0.2).dynamic_bias
         for s in range(8000)]
    ratio = np.var(a) / np.var(b)
    assert 0.93 < ratio < 1.07


@pytest.mark.parametrize("dt", [0.0, -1.0])
def test_advance_rejects_nonpositive_step(dt):
    with pytest.raises(ValueError):
        advance(ClockState(0), dt)


def test_advance_does_not_mutate():
    c = ClockState(0, drift_diffusion=1e-20, rng=np.random.default_rng(0))
    advance(c, 1.0)
    assert c.dynamic_bias == 0.0


def test_true_offset_examples():
    assert true_offset(ClockState(0), ClockState(1)) == 0.0
    assert true_offset(ClockState(0), ClockState(1, static_bias=10e-9)) == pytest.approx(10e-9)


@given(st.floats(-1e-6, 1e-6), st.floats(-1e-6, 1e-6), st.floats(-1e-9, 1e-9), st.floats(0, 10))
def test_true_offset_antisymmetric(bi, bj, corr, t):
    ci = ClockState(0, static_bias=bi, software_correction=corr)
    cj = ClockState(1, static_bias=bj)
    assert true_offset(ci, cj, t) + true_offset(cj, ci, t) == 0.0


@given(st.floats(-1e-6, 1e-6), st.floats(0.5, 1.5), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_local_time_affine_without_noise(bias, scale, t1, t2):
    c = ClockState(0, static_bias=bias, freq_scale=scale)
    lhs = local_time(c, t1) - local_time(c, t2)
    assert lhs == pytest.approx(scale * (t1 - t2), abs=1e-12)


def test_jitter_changes_reading():
    c = ClockState(0, jitter_std=1e-12, rng=np.random.default_rng(0))
    draws = np.array([local_time(c, 0.0) for _ in range(5000)])
    assert np.std(draws) == pytest.approx(1e-12, rel=0.05)


def test_init_clocks_bias_range_and_streams():
    clocks = init_clocks(50, np.random.default_rng(7))
    biases = np.array([c.static_bias for c in clocks])
    assert np.all(np.abs(biases) <= 50e-9)
    assert len({c.node_id for c in clocks}) == 50
    assert all(c.freq_scale == 1.0 for c in clocks)
    a = init_clocks(3, np.random.default_rng(7))
    b = init_clocks(3, np.random.default_rng(7))
    assert [advance(c, 1).dynamic_bias for c in a] == [advance(c, 1).dynamic_bias for c in b]


def test_init_clocks_frequency_offset():
    clocks = init_clocks(20, np.random.default_rng(1), freq_offset_ppb=2.0)
    scales = np.array([c.freq_scale for c in clocks])
    assert np.all(np.abs(scales - 1) <= 2e-9) and np.ptp(scales) > 0
