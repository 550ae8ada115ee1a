"""ERPs, point-biserial r² spectra and Morlet spectrograms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import fft as spfft

from .core import Epoch
from .features import multitaper_psd
from .preprocess import FirSpec, design_fir, filtfilt_array, n_taps


@dataclass(frozen=True, eq=False)
class ErpResult:
    mean: np.ndarray            # (n_samples, n_channels)
    n_trials: int
    times: np.ndarray
    smooth_hz: Optional[float] = None
    trials: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class R2Spectrum:
    r2: np.ndarray              # (n_channels, n_freqs)
    freqs: np.ndarray
    n1: int
    n2: int


@dataclass(frozen=True, eq=False)
class Spectrogram:
    power_db: np.ndarray        # (n_freqs, n_times)
    freqs: np.ndarray
    times: np.ndarray
    baseline: object = None


def _stack(epochs: Sequence) -> np.ndarray:
    arrays = [np.asarray(getattr(e, "data", e), float) for e in epochs]
    if not arrays:
        raise ValueError("need at least one epoch")
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"epochs differ in shape: {sorted(shapes)}")
    return np.stack(arrays)


def smoothing_filter(n_samples: int, fs: float, cutoff_hz: float) -> np.ndarray:
    """Lowpass whose length still satisfies the filtfilt length rule.

    The default transition is kept when it fits; otherwise it is widened to
    the narrowest width whose tap count is below ``n_samples / 3``.
    """
    spec = FirSpec("lowpass", cutoff_hz)
    trans = spec.resolved_transition()
    max_taps = (n_samples - 1) // 3
    max_taps -= 1 - max_taps % 2
    if n_taps(trans, fs) > max_taps:
        if max_taps < 3:
            raise ValueError(f"{n_samples} samples too short to smooth at {cutoff_hz} Hz")
        trans = 3.3 * fs / (max_taps - 1)
        if cutoff_hz + trans / 2 >= fs / 2:
            raise ValueError(
                f"{n_samples} samples at {fs} Hz too short for a {cutoff_hz} Hz smoothing filter"
            )
        spec = FirSpec("lowpass", cutoff_hz, transition_hz=trans, taps=max_taps)
    return design_fir(spec, fs)


def compute_erp(epochs: Sequence[Epoch], smooth_hz: Optional[float] = 15.0,
                keep_trials: bool = False) -> ErpResult:
    """Trial average, optionally smoothed by a zero-phase lowpass."""
    X = _stack(epochs)
    if X.ndim == 2:
        X = X[..., None]
    mean = X.mean(axis=0)
    first = epochs[0]
    fs = getattr(first, "fs", None)
    if smooth_hz:
        if fs is None:
            raise ValueError("smoothing needs epochs with a sampling rate")
        mean = filtfilt_array(mean, smoothing_filter(mean.shape[0], fs, smooth_hz))
    times = first.times() if hasattr(first, "times") else np.arange(mean.shape[0])
    return ErpResult(mean, X.shape[0], times, smooth_hz, X if keep_trials else None)


def biserial_r2(x1, x2) -> np.ndarray:
    """Squared point-biserial correlation per column.

    r = sqrt(N1 N2) / (N1 + N2) * (mean(x1) - mean(x2)) / std(x1 ∪ x2) with
    the population std of the pooled values; columns with zero pooled std
    give 0.
    """
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    if x1.ndim == 1:
        x1, x2 = x1[:, None], x2[:, None]
    n1, n2 = x1.shape[0], x2.shape[0]
    if n1 < 1 or n2 < 1:
        raise ValueError("both classes need at least one observation")
    if x1.shape[1:] != x2.shape[1:]:
        raise ValueError("classes must have the same number of frequencies")
    var = np.concatenate([x1, x2], axis=0).var(axis=0)
    diff = x1.mean(axis=0) - x2.mean(axis=0)
    # squared form avoids the sqrt round trip, so hand cases come out exact
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = (n1 * n2) * diff**2 / ((n1 + n2) ** 2 * var)
    return np.where(var > 0, r2, 0.0)


def r2_spectrum(epochs1: Sequence[Epoch], epochs2: Sequence[Epoch], resolution: float = 1.0,
                fmax: float = 30.0) -> R2Spectrum:
    """r² between the multitaper PSDs of two epoch sets, per channel and bin <= fmax."""
    X1, X2 = _stack(epochs1), _stack(epochs2)
    fs = epochs1[0].fs
    f, p1 = multitaper_psd(np.moveaxis(X1, 1, 0), fs, resolution)
    _, p2 = multitaper_psd(np.moveaxis(X2, 1, 0), fs, resolution)
    keep = f <= fmax
    # p: (F, n_trials, n_ch) -> per channel (n_trials, F)
    r2 = np.stack([biserial_r2(p1[keep, :, c].T, p2[keep, :, c].T)
                   for c in range(X1.shape[2])])
    return R2Spectrum(r2, f[keep], X1.shape[0], X2.shape[0])


def rank_components_by_r2(epochs1, epochs2, **kw) -> np.ndarray:
    """Component indices ordered by their peak r² (most discriminative first)."""
    spec = r2_spectrum(epochs1, epochs2, **kw)
    return np.argsort(-spec.r2.max(axis=1), kind="stable")


def frequency_grid(fmin: float, fmax: float, df: float) -> np.ndarray:
    n = int(math.floor((fmax - fmin) / df + 1e-9)) + 1
    return fmin + df * np.arange(n)


def n_cycles_for(f) -> np.ndarray:
    return np.maximum(3.0, np.asarray(f, float) / 2.0)


def morlet_wavelet(f: float, fs: float, n_cycles: Optional[float] = None) -> np.ndarray:
    """Unit-energy complex Morlet wavelet spanning ±5 temporal SDs."""
    nc = float(n_cycles_for(f)) if n_cycles is None else n_cycles
    sigma_t = nc / (2 * np.pi * f)
    half = int(math.ceil(5 * sigma_t * fs))
    t = np.arange(-half, half + 1) / fs
    w = np.exp(2j * np.pi * f * t) * np.exp(-t**2 / (2 * sigma_t**2))
    return w / np.linalg.norm(w)


def morlet_power(X: np.ndarray, fs: float, freqs) -> np.ndarray:
    """Trial-averaged |x * w_f|² for X (n_trials, n_samples) -> (n_freqs, n_samples)."""
    X = np.atleast_2d(np.asarray(X, float))
    N = X.shape[1]
    wavelets = [morlet_wavelet(f, fs) for f in freqs]
    longest = max(w.size for w in wavelets)
    if longest > N:
        raise ValueError(
            f"epochs of {N} samples ({N / fs:.3f} s) shorter than the {freqs[0]} Hz wavelet; "
            f"need at least {longest} samples ({longest / fs:.3f} s)"
        )
    pad = longest // 2
    Xp = np.pad(X, ((0, 0), (pad, pad)), mode="reflect")
    nfft = spfft.next_fast_len(Xp.shape[1] + longest - 1)
    FX = spfft.fft(Xp, nfft, axis=1)
    out = np.empty((len(freqs), N))
    for i, w in enumerate(wavelets):
        conv = spfft.ifft(FX * spfft.fft(w, nfft)[None], axis=1)
        start = pad + w.size // 2
        out[i] = np.mean(np.abs(conv[:, start:start + N]) ** 2, axis=0)
    return out


def morlet_spectrogram(epochs: Sequence[Epoch], fmin: float = 1.0, fmax: float = 30.0,
                       df: float = 0.1, baseline: Union[None, str, tuple] = "epoch",
                       channel: int = 0, crop: Optional[tuple] = None) -> Spectrogram:
    """Trial-averaged Morlet power in dB.

    ``baseline`` is a ``(start, end)`` span in seconds relative to the event,
    ``"epoch"`` for the whole epoch, or ``None`` for absolute dB
    (10 log10 of power).  With a baseline, each frequency is divided by its
    mean power over the span and all trials before the log.  ``crop``
    restricts the returned times.
    """
    X = _stack(epochs)
    if X.ndim == 3:
        X = X[:, :, channel]
    fs = epochs[0].fs
    times = epochs[0].times()
    freqs = frequency_grid(fmin, fmax, df)
    power = morlet_power(X, fs, freqs)
    if baseline is None:
        ref = 1.0
    else:
        if isinstance(baseline, str):
            if baseline != "epoch":
                raise ValueError(f"unknown baseline {baseline!r}")
            sel = np.ones(times.size, bool)
        else:
            sel = (times >= baseline[0]) & (times <= baseline[1])
            if not sel.any():
                raise ValueError(f"baseline {baseline} lies outside the epoch")
        ref = power[:, sel].mean(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / ref)
    if crop is not None:
        keep = (times >= crop[0]) & (times <= crop[1])
        db, times = db[:, keep], times[keep]
    return Spectrogram(db, freqs, times, baseline)


def write_matrix_csv(path, matrix, row_labels, col_labels, corner="") -> None:
    with open(path, "w") as fh:
        fh.write(",".join([corner] + [repr(float(c)) if not isinstance(c, str) else c
                                      for c in col_labels]) + "\n")
        for lab, row in zip(row_labels, np.atleast_2d(matrix)):
            fh.write(",".join([str(lab)] + [repr(float(v)) for v in row]) + "\n")
