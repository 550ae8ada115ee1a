"""Segment statistics, multitaper spectra, band powers and min-max scaling.

The array functions take epoch stacks shaped (n_epochs, n_samples,
n_channels) and return feature matrices; the ``Epoch`` wrappers return
``FeatureVector`` objects carrying a schema of ``channel:part:stat`` names.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal.windows import dpss

from .core import Epoch

SEGMENT_S = 0.1
STATS = ("mean", "std", "var", "kurtosis", "rms")
BANDS = (("delta", 0.5, 4.0), ("theta", 4.0, 8.0), ("alpha", 8.0, 12.0), ("beta", 12.0, 30.0))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema: tuple

    def __post_init__(self):
        v = np.asarray(self.values, float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "schema", tuple(self.schema))
        if v.shape != (len(self.schema),):
            raise ValueError(f"{v.size} values for a schema of {len(self.schema)}")

    def __len__(self):
        return len(self.schema)

    def concat(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(np.concatenate([self.values, other.values]),
                             self.schema + other.schema)


def _channels(n: int, channel_ids) -> list:
    return list(channel_ids) if channel_ids is not None else [f"ch{i}" for i in range(n)]


def segment_bounds(n_samples: int, fs: float, seg_s: float = SEGMENT_S) -> np.ndarray:
    n_seg = int(math.floor(n_samples / fs / seg_s + 1e-9))
    return np.floor(np.arange(n_seg + 1) * seg_s * fs + 1e-9).astype(int)


def time_features_array(X: np.ndarray, fs: float) -> np.ndarray:
    """(n_epochs, n_samples, n_ch) -> (n_epochs, n_ch * n_seg * 5).

    Population moments; kurtosis is excess (Fisher) and 0 for a constant
    segment.  Samples past the last whole 100 ms segment are ignored.
    """
    X = np.asarray(X, float)
    if X.ndim == 2:
        X = X[None]
    b = segment_bounds(X.shape[1], fs)
    n_ep, _, n_ch = X.shape
    out = np.empty((n_ep, n_ch, b.size - 1, len(STATS)))
    for j, (lo, hi) in enumerate(zip(b[:-1], b[1:])):
        seg = X[:, lo:hi, :]
        mu = seg.mean(axis=1)
        dev = seg - mu[:, None, :]
        m2 = np.mean(dev**2, axis=1)
        m4 = np.mean(dev**4, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2, 1.0) ** 2 - 3.0, 0.0)
        out[:, :, j, 0] = mu
        out[:, :, j, 1] = np.sqrt(m2)
        out[:, :, j, 2] = m2
        out[:, :, j, 3] = kurt
        out[:, :, j, 4] = np.sqrt(np.mean(seg**2, axis=1))
    return out.reshape(n_ep, -1)


def time_schema(n_samples: int, fs: float, channel_ids) -> tuple:
    n_seg = segment_bounds(n_samples, fs).size - 1
    return tuple(f"{c}:seg{j}:{s}" for c in channel_ids for j in range(n_seg) for s in STATS)


def time_features(epoch: Epoch, channel_ids=None) -> FeatureVector:
    ids = _channels(epoch.data.shape[1], channel_ids)
    return FeatureVector(time_features_array(epoch.data, epoch.fs)[0],
                         time_schema(epoch.n_samples, epoch.fs, ids))


def multitaper_psd(x, fs: float, resolution: float = 1.0, nfft: Optional[int] = None):
    """One-sided multitaper PSD density (units²/Hz) along axis 0.

    DPSS tapers with NW = duration * resolution / 2 and
    K = max(1, floor(2 NW) - 1), combined with eigenvalue weights.  ``nfft``
    may exceed the signal length to place bins on a finer grid.
    Returns ``(freqs, psd)``.
    """
    x = np.asarray(x, float)
    N = x.shape[0]
    duration = N / fs
    if duration < 1.0 / resolution - 1e-12:
        raise ValueError(
            f"epoch of {duration:.3f} s too short for {resolution} Hz resolution "
            f"(need {1.0 / resolution:.3f} s)"
        )
    NW = duration * resolution / 2.0
    K = max(1, int(math.floor(2 * NW + 1e-9)) - 1)
    tapers, ratios = dpss(N, NW, Kmax=K, return_ratios=True)
    nfft = N if nfft is None else max(int(nfft), N)
    shape = (K, N) + (1,) * (x.ndim - 1)
    spec = np.fft.rfft(tapers.reshape(shape) * x[None], n=nfft, axis=1)
    w = ratios / ratios.sum()
    psd = np.tensordot(w, np.abs(spec) ** 2, axes=(0, 0)) / fs
    psd[1:] *= 2.0
    if nfft % 2 == 0:
        psd[-1] /= 2.0
    return np.fft.rfftfreq(nfft, 1.0 / fs), psd


def _band_resolution(n_samples: int, fs: float) -> float:
    return max(1.0, fs / n_samples)


def band_features_array(X: np.ndarray, fs: float, resolution: Optional[float] = None) -> np.ndarray:
    """(n_epochs, n_samples, n_ch) -> (n_epochs, n_ch * 4 bands * 2).

    Mean and population std of PSD bins on a 1 Hz grid inside each band.
    The default resolution is 1 Hz, widened to 1/duration for epochs shorter
    than a second.
    """
    X = np.asarray(X, float)
    if X.ndim == 2:
        X = X[None]
    n_ep, N, n_ch = X.shape
    res = _band_resolution(N, fs) if resolution is None else resolution
    nfft = max(N, int(round(fs)))
    freqs, psd = multitaper_psd(np.moveaxis(X, 1, 0), fs, res, nfft=nfft)  # (F, n_ep, n_ch)
    out = np.zeros((n_ep, n_ch, len(BANDS), 2))
    for b, (name, lo, hi) in enumerate(BANDS):
        sel = (freqs >= lo) & (freqs < hi)
        if not sel.any():
            warnings.warn(f"band {name} has no bins at fs={fs}, nfft={nfft}; features set to 0")
            continue
        out[:, :, b, 0] = psd[sel].mean(axis=0)
        out[:, :, b, 1] = psd[sel].std(axis=0)
    return out.reshape(n_ep, -1)


def band_schema(channel_ids) -> tuple:
    return tuple(f"{c}:{name}:{s}" for c in channel_ids for name, _, _ in BANDS
                 for s in ("mean", "std"))


def band_features(epoch: Epoch, channel_ids=None, resolution: Optional[float] = None) -> FeatureVector:
    ids = _channels(epoch.data.shape[1], channel_ids)
    return FeatureVector(band_features_array(epoch.data, epoch.fs, resolution)[0], band_schema(ids))


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    mins: np.ndarray
    maxs: np.ndarray
    schema: tuple = ()
    fitted_on: tuple = field(default=())

    @classmethod
    def fit(cls, X, schema=(), fitted_on=()) -> "MinMaxScaler":
        X = np.asarray(X, float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("scaler needs a non-empty 2-D training matrix")
        return cls(X.min(axis=0), X.max(axis=0), tuple(schema), tuple(fitted_on))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.mins) / safe, 0.0)

    def to_json(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist(),
                "schema": list(self.schema), "fitted_on": list(self.fitted_on)}

    @classmethod
    def from_json(cls, d) -> "MinMaxScaler":
        return cls(np.asarray(d["mins"], float), np.asarray(d["maxs"], float),
                   tuple(d.get("schema", ())), tuple(d.get("fitted_on", ())))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json()) + "\n")
        return path


def minmax_scale(train: Sequence, apply_to: Sequence = (), fitted_on=()):
    """Scale with train-only min/max; unseen values may leave [0, 1].

    Accepts lists of ``FeatureVector`` or 2-D arrays and returns
    ``(scaled_train, scaled_apply, scaler)`` as arrays.
    """
    def as_matrix(rows):
        if isinstance(rows, np.ndarray):
            return rows.astype(float)
        rows = list(rows)
        if rows and isinstance(rows[0], FeatureVector):
            return np.stack([r.values for r in rows])
        return np.asarray(rows, float).reshape(len(rows), -1)

    Xtr = as_matrix(train)
    schema = train[0].schema if len(train) and isinstance(train[0], FeatureVector) else ()
    scaler = MinMaxScaler.fit(Xtr, schema, fitted_on)
    Xap = as_matrix(apply_to) if len(apply_to) else np.empty((0, Xtr.shape[1]))
    return scaler.transform(Xtr), scaler.transform(Xap), scaler


def write_features_csv(path, X, schema, labels=None) -> Path:
    path = Path(path)
    X = np.atleast_2d(np.asarray(X, float))
    with open(path, "w") as fh:
        head = list(schema) + (["label"] if labels is not None else [])
        fh.write(",".join(head) + "\n")
        for i, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(labels[i]))
            fh.write(",".join(cells) + "\n")
    return path
