import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oculodec.core import NeuralSignal
from oculodec.preprocess import (
    FirSpec, design_fir, filtfilt, filtfilt_array, freq_response, n_taps, preprocess,
    rational_ratio, resample, resample_array,
)

FS = 2000.0


def _tone(f, seconds=4.0, fs=FS, amp=1.0):
    t = np.arange(int(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * f * t)


def test_tap_rule():
    assert n_taps(2.0, 2000.0) == 3301
    assert n_taps(1.0, 100.0) % 2 == 1


def test_lowpass_has_unit_dc_gain():
    h = design_fir(FirSpec("lowpass", FS / 4, taps=101), FS)
    assert abs(h.sum() - 1.0) <= 1e-6


def test_highpass_response():
    h = design_fir(FirSpec("highpass", 0.5), FS)
    assert freq_response(h, [0.0], FS)[0] <= 1e-6
    assert freq_response(h, [10.0], FS)[0] >= 0.99


def test_notch_response():
    h = design_fir(FirSpec("notch", 50.0), FS)
    g50, g40 = freq_response(h, [50.0, 40.0], FS)
    assert g50 <= 0.01
    assert g40 >= 0.95


def test_cutoff_above_nyquist_rejected():
    with pytest.raises(ValueError):
        design_fir(FirSpec("lowpass", 1000.0), FS)
    with pytest.raises(ValueError):
        FirSpec("bandpass", 10.0)


def test_allpass_is_identity(rng):
    x = rng.normal(size=(500, 3))
    np.testing.assert_array_equal(filtfilt_array(x, [1.0]), x)


def test_lowpass_has_zero_lag():
    x = _tone(10.0, seconds=8.0)
    y = filtfilt_array(x, design_fir(FirSpec("lowpass", 15.0), FS))
    xc = np.correlate(y, x, mode="full")
    assert np.argmax(xc) - (x.size - 1) == 0


def test_notch_removes_line_noise():
    x = _tone(50.0, seconds=12.0)
    y = filtfilt_array(x, design_fir(FirSpec("notch", 50.0), FS))
    core = slice(6000, -6000)
    assert np.sqrt(np.mean(y[core] ** 2)) <= 0.02 * np.sqrt(np.mean(x[core] ** 2))


def test_short_signal_rejected():
    with pytest.raises(ValueError, match="too short"):
        filtfilt_array(np.zeros(100), design_fir(FirSpec("lowpass", 15.0), FS))


def test_resample_preserves_dc():
    sig = NeuralSignal(np.full((20000, 2), 5.0), FS)
    out = resample(sig, 64.0)
    assert out.n_samples == round(20000 * 64 / 2000)
    np.testing.assert_allclose(out.data, 5.0, atol=1e-6)
    assert rational_ratio(2000.0, 64.0) == (4, 125)


def test_resample_passes_low_and_blocks_high():
    y = resample_array(_tone(5.0, 10.0), FS, 64.0)
    t = np.arange(y.size) / 64.0
    core = slice(64, -64)
    basis = np.column_stack([np.sin(2 * np.pi * 5 * t), np.cos(2 * np.pi * 5 * t)])[core]
    coef, *_ = np.linalg.lstsq(basis, y[core], rcond=None)
    assert abs(np.hypot(*coef) - 1.0) <= 0.02
    z = resample_array(_tone(100.0, 10.0), FS, 64.0)
    assert np.sqrt(np.mean(z[core] ** 2)) <= 0.01


def test_irrational_ratio_rejected():
    with pytest.raises(ValueError, match="not rational"):
        rational_ratio(2000.0, 2000.0 / np.pi)


def test_cascade_matches_direct(rng):
    white = rng.normal(size=40000)
    x = filtfilt_array(white, design_fir(FirSpec("lowpass", 23.0), FS))
    direct = resample_array(x, FS, 64.0)
    cascade = resample_array(resample_array(x, FS, 1024.0), 1024.0, 64.0)
    n = min(direct.size, cascade.size)
    core = slice(64, n - 64)
    err = np.sqrt(np.mean((direct[core] - cascade[core]) ** 2))
    assert err <= 0.02 * np.sqrt(np.mean(direct[core] ** 2))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_filtfilt_is_linear(a, b, seed):
    r = np.random.default_rng(seed)
    x, y = r.normal(size=(2, 600))
    h = design_fir(FirSpec("lowpass", 40.0, transition_hz=20.0), 500.0)
    lhs = filtfilt_array(a * x + b * y, h)
    rhs = a * filtfilt_array(x, h) + b * filtfilt_array(y, h)
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-9 * scale


@settings(max_examples=20, deadline=None)
@given(cut=st.floats(5.0, 100.0), pos=st.integers(300, 700))
def test_impulse_response_is_symmetric(cut, pos):
    h = design_fir(FirSpec("lowpass", cut, transition_hz=10.0), 500.0)
    x = np.zeros(1000)
    x[pos] = 1.0
    y = filtfilt_array(x, h)
    w = min(pos, 999 - pos)
    left, right = y[pos - w:pos][::-1], y[pos + 1:pos + 1 + w]
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_preprocess_chain_keeps_shape(short_session):
    session, _ = short_session
    out = preprocess(session.neural)
    assert out.data.shape == session.neural.data.shape
    assert filtfilt(session.neural, [1.0]).fs == session.neural.fs
