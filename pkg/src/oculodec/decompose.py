"""Whitening, FastICA (single and group level) and xDAWN spatial filtering.

Both model kinds reduce to one linear map from sensors to components,
``UnmixingModel.matrix`` with shape (k, n_channels), applied without
re-centering so that applying a model is exactly linear.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .core import Epoch, Klass, NeuralSignal
from .io import matrix_from_json, matrix_to_json

EIG_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class UnmixingModel:
    kind: str                               # "ica" | "xdawn" | "identity"
    unmixing: np.ndarray                    # ICA: (k, k) acting on whitened data; xDAWN: (c, n) filters
    channel_ids: tuple
    whitener: Optional[np.ndarray] = None   # ICA only: (k, n)
    mean: Optional[np.ndarray] = None
    session_ids: tuple = ()
    converged: bool = True
    n_iter: int = 0
    eigenvalues: Optional[np.ndarray] = None  # xDAWN generalized eigenvalues

    @property
    def matrix(self) -> np.ndarray:
        if self.whitener is None:
            return self.unmixing
        return self.unmixing @ self.whitener

    @property
    def n_components(self) -> int:
        return self.matrix.shape[0]

    @property
    def patterns(self) -> np.ndarray:
        """Sensor-space loading of each component, (n_channels, k)."""
        return np.linalg.pinv(self.matrix)

    @classmethod
    def identity(cls, channel_ids) -> "UnmixingModel":
        n = len(channel_ids)
        return cls("identity", np.eye(n), tuple(channel_ids))

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "channel_ids": list(self.channel_ids),
            "session_ids": list(self.session_ids),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "unmixing": matrix_to_json(self.unmixing),
        }
        if self.whitener is not None:
            out["whitener"] = matrix_to_json(self.whitener)
        if self.mean is not None:
            out["mean"] = list(map(float, self.mean))
        if self.eigenvalues is not None:
            out["eigenvalues"] = list(map(float, self.eigenvalues))
        return out

    @classmethod
    def from_json(cls, d: dict) -> "UnmixingModel":
        return cls(
            kind=d["kind"],
            unmixing=matrix_from_json(d["unmixing"]),
            channel_ids=tuple(d["channel_ids"]),
            whitener=matrix_from_json(d["whitener"]) if "whitener" in d else None,
            mean=np.asarray(d["mean"]) if "mean" in d else None,
            session_ids=tuple(d.get("session_ids", ())),
            converged=d.get("converged", True),
            n_iter=d.get("n_iter", 0),
            eigenvalues=np.asarray(d["eigenvalues"]) if "eigenvalues" in d else None,
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "UnmixingModel":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class SourceSignal:
    components: np.ndarray  # (n_samples, k)
    fs: float
    component_ids: tuple
    model: UnmixingModel = field(repr=False)

    def as_signal(self) -> NeuralSignal:
        return NeuralSignal(self.components, self.fs, self.component_ids)


def _data(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), float)


def whiten(signal, k: Optional[int] = None):
    """PCA whitening from the sample covariance.

    Returns ``(whitener, whitened, mean)``; ``whitener`` is D^(-1/2) E^T over
    the retained eigenpairs in descending order.  Eigenvalues below
    ``1e-10 * max`` count as rank deficiency.
    """
    X = _data(signal)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / Xc.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = evals[0] if evals.size else 0.0
    rank = int(np.sum(evals > EIG_FLOOR * top)) if top > 0 else 0
    if k is None:
        k = rank
    if k > rank:
        raise ValueError(f"requested {k} components but data rank is {rank}")
    if k < 1:
        raise ValueError("data have rank 0; nothing to whiten")
    W = evecs[:, :k].T / np.sqrt(evals[:k])[:, None]
    return W, Xc @ W.T, mean


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u / np.sqrt(s)) @ u.T @ W


def _fastica_symmetric(Z: np.ndarray, W: np.ndarray, tol: float, max_iter: int):
    T = Z.shape[0]
    W = _sym_decorrelate(W)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Y = Z @ W.T
        G = np.tanh(Y)
        dG = 1.0 - G**2
        W_new = _sym_decorrelate(G.T @ Z / T - dG.mean(axis=0)[:, None] * W)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
        W = W_new
        if lim < tol:
            converged = True
            break
    return W, converged, it


def _canonical_order(matrix: np.ndarray):
    """Order by back-projected variance, sign so the peak loading is positive."""
    patterns = np.linalg.pinv(matrix)
    power = np.sum(patterns**2, axis=0)
    order = np.argsort(-power, kind="stable")
    signs = np.sign(patterns[np.argmax(np.abs(patterns), axis=0), np.arange(patterns.shape[1])])
    signs[signs == 0] = 1.0
    return order, signs


def fastica_fit(signal, k: Optional[int] = None, seed: int = 0, tol: float = 1e-6,
                max_iter: int = 500, channel_ids=None, session_ids=()) -> UnmixingModel:
    """Symmetric fixed-point FastICA with a tanh contrast.

    Non-convergence is reported through ``model.converged``, never raised.
    """
    X = _data(signal)
    if channel_ids is None:
        channel_ids = getattr(signal, "channel_ids", tuple(f"ch{i}" for i in range(X.shape[1])))
    whitener, Z, mean = whiten(X, k)
    k = whitener.shape[0]
    if X.shape[0] < 50 * k:
        raise ValueError(f"need at least {50 * k} samples for {k} components, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    W, converged, n_iter = _fastica_symmetric(Z, rng.normal(size=(k, k)), tol, max_iter)
    order, signs = _canonical_order(W @ whitener)
    W = (W * signs[:, None])[order]
    return UnmixingModel("ica", W, tuple(channel_ids), whitener=whitener, mean=mean,
                         session_ids=tuple(session_ids), converged=converged, n_iter=n_iter)


def group_ica_fit(signals: Sequence, k: Optional[int] = None, seed: int = 0, **kw) -> UnmixingModel:
    """One ICA model from temporally concatenated sessions sharing a channel set."""
    if not signals:
        raise ValueError("no sessions given")
    sigs = [getattr(s, "neural", s) for s in signals]
    ids = sigs[0].channel_ids
    for s in sigs[1:]:
        if tuple(s.channel_ids) != tuple(ids):
            raise ValueError("sessions must share the same channels in the same order")
    session_ids = tuple(getattr(s, "session_id", f"s{i}") for i, s in enumerate(signals))
    X = np.concatenate([s.data for s in sigs], axis=0)
    return fastica_fit(X, k, seed, channel_ids=ids, session_ids=session_ids, **kw)


def apply_unmixing(model: UnmixingModel, signal) -> SourceSignal:
    ids = tuple(getattr(signal, "channel_ids", model.channel_ids))
    if ids != tuple(model.channel_ids):
        raise ValueError(
            f"channel mismatch: model fitted on {list(model.channel_ids)}, got {list(ids)}"
        )
    X = _data(signal)
    comps = X @ model.matrix.T
    prefix = {"ica": "IC", "xdawn": "XD"}.get(model.kind, "C")
    names = tuple(f"{prefix}{i:02d}" for i in range(comps.shape[1]))
    return SourceSignal(comps, getattr(signal, "fs", float("nan")), names, model)


def apply_to_epochs(model: UnmixingModel, epochs: Sequence[Epoch]) -> list[Epoch]:
    M = model.matrix.T
    return [Epoch(e.data @ M, e.t0_offset, e.fs, e.label, e.onset_s) for e in epochs]


def amari_distance(P: np.ndarray) -> float:
    """Normalised Amari index of a square gain matrix; 0 iff scaled permutation."""
    P = np.abs(np.asarray(P, float))
    n = P.shape[0]
    if n < 2:
        return 0.0
    rows = np.sum(P.sum(axis=1) / P.max(axis=1) - 1)
    cols = np.sum(P.sum(axis=0) / P.max(axis=0) - 1)
    return float((rows + cols) / (2 * n * (n - 1)))


def _covariance(X: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def xdawn_fit_arrays(X: np.ndarray, is_target, n_components: int = 2,
                     channel_ids=None) -> UnmixingModel:
    """xDAWN from an epoch array (n_epochs, n_samples, n_channels).

    Maximises w' C_evoked w / w' C_total w where C_evoked is the covariance
    of the time-locked target average and C_total the covariance of all
    epoch samples.
    """
    X = np.asarray(X, float)
    is_target = np.asarray(is_target, bool)
    n_ch = X.shape[2]
    if is_target.sum() < 5:
        raise ValueError(f"xDAWN needs at least 5 target epochs, got {is_target.sum()}")
    if not 1 <= n_components <= n_ch:
        raise ValueError(f"n_components must be in [1, {n_ch}]")
    evoked = X[is_target].mean(axis=0)
    c_evoked = _covariance(evoked)
    c_total = _covariance(X.reshape(-1, n_ch))
    ev = np.linalg.eigvalsh(c_total)
    if ev[0] <= 1e-12 * max(ev[-1], np.finfo(float).tiny):
        warnings.warn("total covariance is singular; adding ridge 1e-9 * trace / n", RuntimeWarning)
        c_total = c_total + 1e-9 * np.trace(c_total) / n_ch * np.eye(n_ch)
    evals, evecs = scipy.linalg.eigh(c_evoked, c_total)
    order = np.argsort(evals)[::-1][:n_components]
    F = evecs[:, order].T
    F /= np.linalg.norm(F, axis=1, keepdims=True)
    peak = np.argmax(np.abs(F), axis=1)
    F *= np.sign(F[np.arange(F.shape[0]), peak])[:, None]
    if channel_ids is None:
        channel_ids = tuple(f"ch{i}" for i in range(n_ch))
    return UnmixingModel("xdawn", F, tuple(channel_ids), eigenvalues=evals[order])


def xdawn_fit(epochs: Sequence[Epoch], n_components: int = 2, target_klass=Klass.SACCADE,
              channel_ids=None) -> UnmixingModel:
    shapes = {e.data.shape for e in epochs}
    if len(shapes) != 1:
        raise ValueError(f"all epochs must share one shape, got {sorted(shapes)}")
    X = np.stack([e.data for e in epochs])
    target = [e.label.klass == Klass(target_klass) for e in epochs]
    return xdawn_fit_arrays(X, target, n_components, channel_ids)


def ssnr(X: np.ndarray) -> np.ndarray:
    """Per-channel SSNR of target epochs (n_epochs, n_samples, n_channels).

    Variance of the class-average response over variance of the residual.
    """
    X = np.asarray(X, float)
    avg = X.mean(axis=0)
    resid = X - avg
    return avg.var(axis=0) / resid.reshape(-1, X.shape[2]).var(axis=0)
