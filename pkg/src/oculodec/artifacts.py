"""Cardiac R-peak detection and time-selective common average referencing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .core import NeuralSignal
from .preprocess import FirSpec, design_fir, filtfilt_array, n_taps

REFRACTORY_S = 0.25
MAD_TO_SD = 1.4826
FLOOR_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class RPeakSet:
    times: np.ndarray
    statistic: str = "|channel mean of 5-40 Hz bandpass|"

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("R-peak times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size


def _bandpass(x: np.ndarray, fs: float, lo: float, hi: float) -> np.ndarray:
    y = filtfilt_array(x, design_fir(FirSpec("highpass", lo), fs))
    if hi < fs / 2:
        y = filtfilt_array(y, design_fir(FirSpec("lowpass", hi), fs))
    return y


def detection_statistic(sig: NeuralSignal, band=(5.0, 40.0)) -> np.ndarray:
    """Absolute value of the cross-channel mean of the band-passed signal.

    Cardiac peaks share sign across channels and add coherently; independent
    channel noise averages down.
    """
    return np.abs(np.mean(_bandpass(sig.data, sig.fs, *band), axis=1))


def detect_r_peaks(sig: NeuralSignal, threshold_mads: float = 4.0,
                   refractory_s: float = REFRACTORY_S) -> RPeakSet:
    """Find cardiac R-peaks as refractory-separated maxima of a robust statistic.

    A sample is a candidate when the statistic exceeds its median by more
    than ``threshold_mads`` robust standard deviations (MAD scaled to the
    normal SD) and also reaches ``FLOOR_FRACTION`` of the statistic's
    99.5th percentile, which keeps near-silent stretches from passing a
    collapsed MAD.  Among candidates closer than ``refractory_s`` only the
    largest survives.
    """
    need = 3 * n_taps(FirSpec("highpass", 5.0).resolved_transition(), sig.fs) + 1
    if sig.n_samples < need:
        raise ValueError(
            f"need at least {need} samples ({need / sig.fs:.3f} s) for R-peak detection, "
            f"got {sig.n_samples}"
        )
    stat = detection_statistic(sig)
    med = np.median(stat)
    thr = med + threshold_mads * MAD_TO_SD * np.median(np.abs(stat - med))
    thr = max(thr, FLOOR_FRACTION * np.percentile(stat, 99.5))
    idx, _ = sps.find_peaks(stat, distance=max(1, math.ceil(refractory_s * sig.fs)))
    idx = idx[stat[idx] > thr]
    return RPeakSet(idx / sig.fs)


def window_mask(n_samples: int, fs: float, peaks, window_ms: float = 130.0) -> np.ndarray:
    """Boolean sample mask covering [c - h, c + h) around each peak, merged."""
    mask = np.zeros(n_samples, bool)
    half = int(round(window_ms / 2000.0 * fs))
    for t in np.asarray(getattr(peaks, "times", peaks), float):
        c = int(round(t * fs))
        mask[max(0, c - half):max(0, min(n_samples, c + half))] = True
    return mask


def ts_car_array(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Subtract the (n+1)-channel mean, zero channel included, where ``mask``."""
    out = np.array(x, float, copy=True)
    if mask.any():
        seg = out[mask]
        out[mask] = seg - seg.sum(axis=1, keepdims=True) / (seg.shape[1] + 1)
    return out


def ts_car(sig: NeuralSignal, peaks: RPeakSet, window_ms: float = 130.0) -> NeuralSignal:
    """Time-selective CAR inside ``window_ms`` windows centred on each R-peak.

    A virtual zero channel joins the average so the operator stays full
    rank; samples outside every window are returned untouched.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    if len(peaks) == 0:
        return sig
    mask = window_mask(sig.n_samples, sig.fs, peaks, window_ms)
    return sig.replace(data=ts_car_array(sig.data, mask))
