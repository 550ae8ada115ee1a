import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oculodec.artifacts import RPeakSet, detect_r_peaks, ts_car, ts_car_array, window_mask
from oculodec.core import NeuralSignal
from oculodec.synthgen import cardiac_waveform


def test_planted_r_peaks_are_found(short_session):
    session, truth = short_session
    found = detect_r_peaks(session.neural).times
    planted = truth.r_peaks
    dist = np.abs(planted[:, None] - found[None])
    hits = (dist.min(axis=1) <= 0.010).mean()
    false_pos = (dist.min(axis=0) > 0.010).sum()
    assert hits >= 0.95
    assert false_pos <= 2


def test_zero_signal_gives_no_peaks():
    assert len(detect_r_peaks(NeuralSignal(np.zeros((6000, 3)), 1000.0))) == 0


def test_refractory_keeps_one_of_two_close_peaks(rng):
    fs = 1000.0
    t = np.arange(6000) / fs
    wave = cardiac_waveform(t - 3.0, 0.02) + 0.9 * cardiac_waveform(t - 3.1, 0.02)
    X = np.outer(wave, np.ones(4)) * 50
    assert len(detect_r_peaks(NeuralSignal(X, fs))) == 1


def test_short_input_names_required_length():
    with pytest.raises(ValueError, match="samples"):
        detect_r_peaks(NeuralSignal(np.zeros((2000, 3)), 1000.0))


def test_peak_set_must_increase():
    with pytest.raises(ValueError):
        RPeakSet([1.0, 0.5])


def test_three_equal_channels():
    out = ts_car_array(np.array([[3.0, 3.0, 3.0]]), np.array([True]))
    np.testing.assert_allclose(out, [[0.75, 0.75, 0.75]])


def test_outside_windows_untouched(short_session):
    session, truth = short_session
    peaks = RPeakSet(truth.r_peaks)
    out = ts_car(session.neural, peaks)
    mask = window_mask(session.neural.n_samples, session.neural.fs, peaks)
    assert np.array_equal(out.data[~mask], session.neural.data[~mask])
    assert not np.array_equal(out.data[mask], session.neural.data[mask])


def test_identical_artifact_residual(rng):
    n = 11
    art = rng.normal(size=(400, 1)) * np.ones((1, n))
    out = ts_car_array(art, np.ones(400, bool))
    ratio = np.sqrt(np.mean(out ** 2)) / np.sqrt(np.mean(art ** 2))
    assert abs(ratio - 1 / 12) <= 1e-12


def test_empty_peaks_is_identity(short_session):
    session, _ = short_session
    assert ts_car(session.neural, RPeakSet([])) is session.neural


def test_window_edges_half_open():
    m = window_mask(100, 100.0, [0.5], window_ms=100)
    assert np.flatnonzero(m).tolist() == list(range(45, 55))


def test_rank_is_preserved(rng):
    X = rng.normal(size=(500, 6))
    out = ts_car_array(X, np.ones(500, bool))
    assert np.linalg.matrix_rank(np.cov(out.T)) == 6


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2**32 - 1))
def test_second_pass_shrinks_by_n_plus_one(n, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(50, n))
    mask = r.random(50) < 0.5
    once = ts_car_array(X, mask)
    twice = ts_car_array(once, mask)
    first = np.abs(once - X).max(axis=1)
    second = np.abs(twice - once).max(axis=1)
    assert np.all(second <= first / (n + 1) + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_commutes_with_channel_permutation(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(40, 7))
    mask = r.random(40) < 0.5
    perm = r.permutation(7)
    np.testing.assert_allclose(ts_car_array(X[:, perm], mask), ts_car_array(X, mask)[:, perm],
                               atol=1e-12)
