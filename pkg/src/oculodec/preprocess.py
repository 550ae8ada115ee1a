"""Zero-phase FIR filtering and rational resampling.

Filters are Hamming-windowed sinc designs.  The tap count follows the
Hamming rule of thumb ``ceil(3.3 * fs / transition)`` rounded up to odd, with
the default transition ``min(cutoff / 2, 2 Hz)``.  Band edges follow the
passband-edge convention: a highpass at 0.5 Hz with a 0.25 Hz transition
has its -6 dB point at 0.375 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import signal as sps

from .core import NeuralSignal

KINDS = ("highpass", "lowpass", "notch")


@dataclass(frozen=True)
class FirSpec:
    kind: str
    cutoff_hz: float
    transition_hz: Optional[float] = None
    taps: Optional[int] = None
    bandwidth_hz: float = 2.0  # notch only
    window: str = "hamming"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if self.taps is not None and self.taps % 2 == 0:
            raise ValueError("taps must be odd for a linear-phase design")

    def resolved_transition(self) -> float:
        if self.transition_hz is not None:
            return float(self.transition_hz)
        if self.kind == "notch":
            return 1.0
        return min(self.cutoff_hz / 2.0, 2.0)


def n_taps(transition_hz: float, fs: float) -> int:
    n = math.ceil(3.3 / (transition_hz / fs))
    return n + 1 if n % 2 == 0 else n


def design_fir(spec: FirSpec, fs: float) -> np.ndarray:
    """Return symmetric windowed-sinc coefficients for ``spec`` at ``fs``."""
    nyq = fs / 2.0
    fc = float(spec.cutoff_hz)
    if not 0 < fc < nyq:
        raise ValueError(f"cutoff {fc} Hz must lie in (0, {nyq}) for fs={fs}")
    trans = spec.resolved_transition()
    if trans <= 0:
        raise ValueError("transition width must be positive")
    taps = spec.taps or n_taps(trans, fs)

    if spec.kind == "lowpass":
        edge = min(fc + trans / 2.0, nyq * 0.999)
        return sps.firwin(taps, edge, window=spec.window, fs=fs)
    if spec.kind == "highpass":
        # spectral inversion of a unit-DC lowpass keeps the DC gain at exactly 0
        edge = max(fc - trans / 2.0, fc / 2.0)
        h = -sps.firwin(taps, edge, window=spec.window, fs=fs)
        h[taps // 2] += 1.0
        return h
    lo = fc - spec.bandwidth_hz / 2.0 - trans / 2.0
    hi = fc + spec.bandwidth_hz / 2.0 + trans / 2.0
    if lo <= 0 or hi >= nyq:
        raise ValueError(f"notch band [{lo}, {hi}] Hz does not fit below Nyquist {nyq}")
    return sps.firwin(taps, [lo, hi], window=spec.window, fs=fs, pass_zero="bandstop")


def freq_response(coeffs, freqs, fs: float) -> np.ndarray:
    """|H(f)| by direct DTFT of ``coeffs``."""
    coeffs = np.asarray(coeffs, float)
    n = np.arange(coeffs.size)
    w = 2 * np.pi * np.asarray(freqs, float)[..., None] / fs
    return np.abs(np.exp(-1j * w * n) @ coeffs)


def _odd_pad(x: np.ndarray, n: int) -> np.ndarray:
    head = 2 * x[:1] - x[n:0:-1]
    tail = 2 * x[-1:] - x[-2:-n - 2:-1]
    return np.concatenate([head, x, tail])


def filtfilt_array(x: np.ndarray, coeffs) -> np.ndarray:
    """Forward-backward FIR filtering along axis 0 with odd reflection padding."""
    h = np.asarray(coeffs, float)
    x = np.asarray(x, float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if h.size == 1:
        out = x * h[0] * h[0]
        return out[:, 0] if squeeze else out
    if x.shape[0] <= 3 * h.size:
        raise ValueError(
            f"signal of {x.shape[0]} samples too short for {h.size}-tap filter "
            f"(need more than {3 * h.size})"
        )
    pad = h.size
    xp = _odd_pad(x, pad)
    n = xp.shape[0]
    kern = h[:, None]
    y = sps.convolve(xp, kern, mode="full")[:n]
    y = sps.convolve(y[::-1], kern, mode="full")[:n][::-1]
    out = y[pad:-pad]
    return out[:, 0] if squeeze else np.ascontiguousarray(out)


def filtfilt(sig: NeuralSignal, coeffs) -> NeuralSignal:
    return sig.replace(data=filtfilt_array(sig.data, coeffs))


def apply_filter(sig: NeuralSignal, kind: str, cutoff_hz: float, **kw) -> NeuralSignal:
    """Design a filter for ``sig.fs`` and apply it zero-phase."""
    return filtfilt(sig, design_fir(FirSpec(kind, cutoff_hz, **kw), sig.fs))


def rational_ratio(fs: float, target_fs: float, max_den: int = 10000) -> tuple[int, int]:
    ratio = Fraction(target_fs) / Fraction(fs)
    approx = ratio.limit_denominator(max_den)
    if abs(float(approx) - target_fs / fs) > 1e-12 * max(1.0, target_fs / fs):
        raise ValueError(
            f"ratio {target_fs}/{fs} is not rational with denominator <= {max_den}"
        )
    return approx.numerator, approx.denominator


def antialias_taps(fs: float, target_fs: float) -> tuple[np.ndarray, int, int]:
    up, down = rational_ratio(fs, target_fs)
    fs_up = fs * up
    h = design_fir(FirSpec("lowpass", 0.45 * target_fs), fs_up)
    # each polyphase branch sums to 1/up so a constant input passes unchanged
    for k in range(up):
        h[k::up] *= (1.0 / up) / h[k::up].sum()
    return h, up, down


def resample_array(x: np.ndarray, fs: float, target_fs: float) -> np.ndarray:
    if not target_fs < fs:
        raise ValueError(f"target rate {target_fs} must be below source rate {fs}")
    h, up, down = antialias_taps(fs, target_fs)
    y = sps.resample_poly(np.asarray(x, float), up, down, axis=0, window=h, padtype="line")
    n_out = int(round(x.shape[0] * target_fs / fs))
    return np.ascontiguousarray(y[:n_out])


def resample(sig: NeuralSignal, target_fs: float) -> NeuralSignal:
    return sig.replace(data=resample_array(sig.data, sig.fs, target_fs), fs=target_fs)


def preprocess(sig: NeuralSignal, highpass: Optional[float] = 0.5,
               notch: Optional[float] = 50.0, lowpass: Optional[float] = None) -> NeuralSignal:
    """The shared filtering front end: highpass then notch, both zero-phase."""
    if highpass:
        sig = apply_filter(sig, "highpass", highpass)
    if notch:
        sig = apply_filter(sig, "notch", notch)
    if lowpass:
        sig = apply_filter(sig, "lowpass", lowpass)
    return sig
