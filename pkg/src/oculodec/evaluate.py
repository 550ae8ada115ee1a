"""Leave-one-run-out evaluation, exact AUC, decoding protocols and wait-time statistics.

The decoding chain per session is: FIR highpass and notch, R-peak
detection with time-selective CAR, downsampling, gaze-based saccade
labelling and epoching.  Onset decoding (saccade vs fixation) uses xDAWN
components summarised by time and band features; direction decoding uses
the raw downsampled epochs.  Every fitted object (xDAWN filters, min-max
scaler, classifier) sees training epochs only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .artifacts import RPeakSet, detect_r_peaks, ts_car
from .classify import ClassifierSpec, TrainedModel, grid_search, predict_proba, train
from .core import (
    DIRECTIONS,
    Klass,
    MarkerKind,
    NeuralSignal,
    Role,
    Session,
    Task,
)
from .decompose import UnmixingModel, xdawn_fit_arrays
from .epoching import (
    EpochConfig,
    SaccadeEvent,
    default_targets,
    detect_saccade_onsets,
    extract_epochs,
    extract_fixation_epochs,
    label_trials,
    select_role,
)
from .features import MinMaxScaler, band_features_array, time_features_array
from .preprocess import preprocess, resample

ROLES = ("initial", "back", "combined")
INTERVALS = ("pre", "post", "pre+post")
PAIRS = tuple(f"{a.value}-{b.value}" for a, b in combinations(DIRECTIONS, 2))
COMPARISONS = ("onset", "4class") + PAIRS


# ---------------------------------------------------------------- folds and AUC

@dataclass(frozen=True)
class FoldPlan:
    folds: tuple  # ((train_runs, test_run), ...)

    def __len__(self):
        return len(self.folds)

    def splits(self, run_labels) -> list[tuple[np.ndarray, np.ndarray]]:
        runs = np.asarray(run_labels)
        return [(np.flatnonzero(np.isin(runs, tr)), np.flatnonzero(runs == te))
                for tr, te in self.folds]


def make_loro(run_labels) -> FoldPlan:
    """One fold per run: that run is the test set, all others train."""
    runs = sorted(set(np.asarray(run_labels).tolist()))
    if len(runs) < 2:
        raise ValueError(
            "leave-one-run-out needs at least 2 runs; splitting within a run is unsupported "
            "because temporally adjacent epochs are correlated"
        )
    return FoldPlan(tuple((tuple(r for r in runs if r != te), te) for te in runs))


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    n1 = int(positive.sum())
    n0 = positive.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both a positive and a negative example")
    ranks = rankdata(scores)  # midranks: a tie contributes one half
    return float((ranks[positive].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auc_roc(scores, labels, classes: Optional[Sequence] = None) -> float:
    """Exact ROC AUC by the Mann-Whitney statistic.

    Binary: ``scores`` is 1-D and the positive class is the larger label
    (or ``classes[1]``).  Multiclass: ``scores`` is (n, K) with columns in
    ``classes`` order (default sorted labels) and the result is the
    unweighted mean of one-vs-rest AUCs.
    """
    scores = np.asarray(scores, float)
    labels = np.asarray(labels)
    if classes is None:
        classes = np.unique(labels).tolist()
    if scores.ndim == 1:
        if len(classes) != 2:
            raise ValueError(f"binary AUC needs two classes, got {list(classes)}")
        return _binary_auc(scores, labels == classes[1])
    if scores.shape[1] != len(classes):
        raise ValueError(f"{scores.shape[1]} score columns for {len(classes)} classes")
    missing = [c for c in classes if not np.any(labels == c)]
    if missing:
        raise ValueError(f"classes absent from labels: {missing}")
    return float(np.mean([_binary_auc(scores[:, k], labels == c) for k, c in enumerate(classes)]))


def score_auc(model: TrainedModel, X, y) -> float:
    proba = predict_proba(model, X)
    if len(model.classes) == 2:
        return auc_roc(proba[:, 1], y, model.classes)
    return auc_roc(proba, y, model.classes)


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class PipelineConfig:
    highpass_hz: Optional[float] = 0.5
    notch_hz: Optional[float] = 50.0
    lowpass_hz: Optional[float] = None
    ts_car: bool = True
    car_window_ms: float = 130.0
    exclude_channels: tuple = ()
    target_fs: float = 64.0
    onset_source: str = "gaze"            # or "markers"
    target_eccentricity_cm: float = 8.5
    xdawn_components: int = 2
    classifier: ClassifierSpec = ClassifierSpec("random_forest", n_estimators=100, seed=0)
    grid: Optional[tuple] = None          # ClassifierSpecs to search per fold
    roles: tuple = ROLES
    intervals: tuple = INTERVALS
    comparisons: tuple = COMPARISONS

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["classifier"] = self.classifier.to_json()
        d["grid"] = None if self.grid is None else [s.to_json() for s in self.grid]
        d["exclude_channels"] = list(self.exclude_channels)
        for k in ("roles", "intervals", "comparisons"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if isinstance(d.get("classifier"), dict):
            d["classifier"] = ClassifierSpec.from_json(d["classifier"])
        if d.get("grid") is not None:
            d["grid"] = tuple(ClassifierSpec.from_json(s) if isinstance(s, dict) else s
                              for s in d["grid"])
        for k in ("exclude_channels", "roles", "intervals", "comparisons"):
            if k in d:
                d[k] = tuple(d[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown pipeline options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PreparedSession:
    signal: NeuralSignal
    events: list
    labels: list
    runs: tuple
    fixations: tuple   # ((start, end, run_index), ...)
    task: Task
    session_id: str
    r_peaks: Optional[RPeakSet] = None


def clean_signal(sig: NeuralSignal, cfg: PipelineConfig, peaks: Optional[RPeakSet] = None):
    """Filtering, cardiac correction and downsampling; returns (signal, peaks)."""
    if cfg.exclude_channels:
        sig = sig.drop(cfg.exclude_channels)
    sig = preprocess(sig, cfg.highpass_hz, cfg.notch_hz, cfg.lowpass_hz)
    if cfg.ts_car:
        if peaks is None:
            peaks = detect_r_peaks(sig)
        sig = ts_car(sig, peaks, cfg.car_window_ms)
    if cfg.target_fs and cfg.target_fs != sig.fs:
        sig = resample(sig, cfg.target_fs)
    return sig, peaks


def _events_from_markers(session: Session) -> list[SaccadeEvent]:
    onsets = session.markers_of(MarkerKind.SACCADE_ONSET)
    offsets = session.markers_of(MarkerKind.SACCADE_OFFSET)
    cues = np.array([m.time for m in session.markers_of(MarkerKind.CUE_ONSET)])
    events, trial = [], -1
    for on, off in zip(onsets, offsets):
        if on.saccade_role == Role.INITIAL:
            trial += 1
        wait = math.nan
        if on.saccade_role == Role.INITIAL and cues.size:
            prior = cues[cues <= on.time]
            wait = float(on.time - prior[-1]) if prior.size else math.nan
        events.append(SaccadeEvent(on.time, off.time, on.direction, on.saccade_role, 0.0,
                                   max(trial, 0), session.run_index_at(on.time), wait))
    return events


def session_events(session: Session, cfg: PipelineConfig = PipelineConfig()):
    cues = [m.time for m in session.markers_of(MarkerKind.CUE_ONSET)]
    if cfg.onset_source == "markers":
        events = _events_from_markers(session)
    elif cfg.onset_source == "gaze":
        events = detect_saccade_onsets(session.gaze, default_targets(cfg.target_eccentricity_cm),
                                       cues, session.runs)
    else:
        raise ValueError(f"onset_source must be 'gaze' or 'markers', got {cfg.onset_source!r}")
    return events, label_trials(events, session.task, cues)


def fixation_intervals(session: Session) -> tuple:
    starts = [m.time for m in session.markers_of(MarkerKind.FIXATION_START)]
    ends = [m.time for m in session.markers_of(MarkerKind.FIXATION_END)]
    return tuple((s, e, session.run_index_at(s)) for s, e in zip(starts, ends))


def prepare_session(session: Session, cfg: PipelineConfig = PipelineConfig(),
                    peaks: Optional[RPeakSet] = None) -> PreparedSession:
    sig, peaks = clean_signal(session.neural, cfg, peaks)
    events, labels = session_events(session, cfg)
    return PreparedSession(sig, events, labels, session.runs, fixation_intervals(session),
                           session.task, session.session_id, peaks)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Saccade and fixation epochs of one session, role and interval."""
    X: np.ndarray          # (n, n_samples, n_channels)
    klass: np.ndarray      # 1 saccade, 0 fixation
    direction: np.ndarray  # direction value or "" for fixation
    run: np.ndarray
    fs: float
    session_id: str = ""
    task: Task = Task.FREE_VIEWING

    def subset(self, idx) -> "Dataset":
        return replace(self, X=self.X[idx], klass=self.klass[idx], direction=self.direction[idx],
                       run=self.run[idx])


def build_dataset(prep: PreparedSession, role: str, interval: str) -> Dataset:
    """Epochs for one role and interval with run-matched fixation epochs."""
    window = EpochConfig.named(interval)
    items = select_role(prep.events, prep.labels, role)
    sac, _ = extract_epochs(prep.signal, items, window, prep.runs)
    fix = []
    for r in sorted({e.label.run_index for e in sac}):
        n_r = sum(e.label.run_index == r for e in sac)
        ivs = [(s, e) for s, e, run in prep.fixations if run == r]
        if not ivs:
            continue
        fix += extract_fixation_epochs(prep.signal, ivs, n_r, window.length, prep.task, r,
                                       t0_offset=-window.window[0])
    epochs = sac + fix
    if not epochs:
        raise ValueError(f"no epochs for role={role}, interval={interval}")
    X = np.stack([e.data for e in epochs])
    klass = np.array([1 if e.label.klass == Klass.SACCADE else 0 for e in epochs])
    direction = np.array([e.label.direction.value if e.label.direction else "" for e in epochs])
    run = np.array([e.label.run_index for e in epochs])
    return Dataset(X, klass, direction, run, prep.signal.fs, prep.session_id, prep.task)


def onset_features(X: np.ndarray, fs: float, model: UnmixingModel) -> np.ndarray:
    Z = X @ model.matrix.T
    return np.hstack([time_features_array(Z, fs), band_features_array(Z, fs)])


@dataclass(frozen=True, eq=False)
class FittedFold:
    comparison: str
    xdawn: Optional[UnmixingModel]
    scaler: MinMaxScaler
    model: TrainedModel

    def parameters(self) -> dict:
        """Every learned array, flattened for bitwise comparison."""
        out = {"scaler.mins": self.scaler.mins, "scaler.maxs": self.scaler.maxs}
        if self.xdawn is not None:
            out["xdawn.filters"] = self.xdawn.matrix
        p = self.model.params
        if "trees" in p:
            for i, t in enumerate(p["trees"]):
                for k, v in t.items():
                    out[f"tree{i}.{k}"] = v
        else:
            out.update({f"model.{k}": v for k, v in p.items()})
        return out


def comparison_subset(ds: Dataset, comparison: str):
    """(indices, labels) used by one comparison."""
    if comparison == "onset":
        return np.arange(ds.klass.size), ds.klass
    sac = ds.klass == 1
    if comparison == "4class":
        idx = np.flatnonzero(sac)
    else:
        a, b = comparison.split("-")
        idx = np.flatnonzero(sac & np.isin(ds.direction, [a, b]))
    return idx, ds.direction[idx]


def _features(ds: Dataset, comparison: str, xdawn: Optional[UnmixingModel]) -> np.ndarray:
    if comparison == "onset":
        return onset_features(ds.X, ds.fs, xdawn)
    return ds.X.reshape(ds.X.shape[0], -1)


def fit_fold(train_ds: Dataset, comparison: str, cfg: PipelineConfig) -> FittedFold:
    """Fit xDAWN (onset only), scaler and classifier on training epochs."""
    idx, y = comparison_subset(train_ds, comparison)
    ds = train_ds.subset(idx)
    xd = None
    if comparison == "onset":
        xd = xdawn_fit_arrays(ds.X, ds.klass == 1, cfg.xdawn_components)
    F = _features(ds, comparison, xd)
    scaler = MinMaxScaler.fit(F)
    Fs = scaler.transform(F)
    spec = cfg.classifier
    if cfg.grid:
        inner = make_loro(ds.run)
        spec = grid_search(list(cfg.grid), Fs, y, inner.splits(ds.run)).best
    return FittedFold(comparison, xd, scaler, train(spec, Fs, y))


def score_fold(fitted: FittedFold, test_ds: Dataset) -> float:
    idx, y = comparison_subset(test_ds, fitted.comparison)
    ds = test_ds.subset(idx)
    F = fitted.scaler.transform(_features(ds, fitted.comparison, fitted.xdawn))
    return score_auc(fitted.model, F, y)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class ReportRow:
    task: str
    protocol: str
    session: str
    role: str
    comparison: str
    interval: str
    mean_auc: float
    fold_aucs: tuple
    n_trials: int
    class_counts: tuple  # ((label, count), ...)

    @property
    def key(self) -> tuple:
        return (self.task, self.protocol, self.session, self.role, self.comparison, self.interval)

    def to_json(self) -> dict:
        return {"task": self.task, "protocol": self.protocol, "session": self.session,
                "role": self.role, "comparison": self.comparison, "interval": self.interval,
                "mean_auc": self.mean_auc, "fold_aucs": list(self.fold_aucs),
                "n_trials": self.n_trials, "class_counts": dict(self.class_counts)}


CSV_FIELDS = ("task", "protocol", "session", "role", "comparison", "interval", "mean_auc",
              "fold_aucs", "n_trials", "class_counts")


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def select(self, **key) -> list[ReportRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in key.items())]

    def mean_auc(self, **key) -> float:
        rows = self.select(**key)
        if not rows:
            raise KeyError(f"no rows match {key}")
        return float(np.mean([r.mean_auc for r in rows]))

    def to_json(self) -> dict:
        return {"config": self.config, "rows": [r.to_json() for r in self.rows]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([r.task, r.protocol, r.session, r.role, r.comparison, r.interval,
                        repr(r.mean_auc), ";".join(repr(a) for a in r.fold_aucs), r.n_trials,
                        ";".join(f"{k}={v}" for k, v in r.class_counts)])
        return buf.getvalue()

    def write(self, outdir, extra: Optional[dict] = None) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        doc = self.to_json()
        if extra:
            doc.update(extra)
        jp = outdir / "report.json"
        jp.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        cp = outdir / "report.csv"
        cp.write_text(self.to_csv())
        return jp, cp

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        rows = [ReportRow(r["task"], r["protocol"], r["session"], r["role"], r["comparison"],
                          r["interval"], r["mean_auc"], tuple(r["fold_aucs"]), r["n_trials"],
                          tuple(sorted(r["class_counts"].items()))) for r in d["rows"]]
        return cls(rows, d.get("config", {}))


def _counts(labels) -> tuple:
    vals, cnt = np.unique(labels, return_counts=True)
    return tuple((str(v), int(c)) for v, c in zip(vals, cnt))


def _within_rows(ds: Dataset, role, interval, cfg) -> list[ReportRow]:
    rows = []
    plan = make_loro(ds.run)
    for comp in cfg.comparisons:
        idx, y = comparison_subset(ds, comp)
        aucs = []
        for i, (tr, te) in enumerate(plan.splits(ds.run)):
            tr_i, te_i = np.intersect1d(tr, idx), np.intersect1d(te, idx)
            classes = np.unique(y)
            if (np.unique(ds.klass[tr_i] if comp == "onset" else ds.direction[tr_i]).size < classes.size
                    or np.unique(ds.klass[te_i] if comp == "onset" else ds.direction[te_i]).size
                    < classes.size):
                warnings.warn(f"{ds.session_id} {role}/{interval}/{comp}: fold {i} skipped, "
                              "a class is missing")
                continue
            try:
                fitted = fit_fold(ds.subset(tr), comp, cfg)
                aucs.append(score_fold(fitted, ds.subset(te)))
            except Exception as exc:
                raise RuntimeError(f"{ds.session_id} {role}/{interval}/{comp} fold {i}: {exc}") from exc
        if not aucs:
            raise RuntimeError(f"{ds.session_id} {role}/{interval}/{comp}: every fold was skipped")
        rows.append(ReportRow(ds.task.value, "within", ds.session_id, role, comp, interval,
                              float(np.mean(aucs)), tuple(aucs), int(idx.size), _counts(y)))
    return rows


def _cross_rows(train_ds: Dataset, test_ds: Dataset, role, interval, cfg) -> list[ReportRow]:
    rows = []
    for comp in cfg.comparisons:
        idx, y = comparison_subset(test_ds, comp)
        try:
            fitted = fit_fold(train_ds, comp, cfg)
            auc = score_fold(fitted, test_ds)
        except Exception as exc:
            raise RuntimeError(
                f"train {train_ds.session_id} -> test {test_ds.session_id} "
                f"{role}/{interval}/{comp}: {exc}") from exc
        rows.append(ReportRow(test_ds.task.value, "cross", test_ds.session_id, role, comp,
                              interval, auc, (auc,), int(idx.size), _counts(y)))
    return rows


def run_protocol(sessions: Sequence, cfg: PipelineConfig = PipelineConfig(),
                 protocol: str = "within") -> EvalReport:
    """Evaluate every role x interval x comparison under one or both protocols.

    ``protocol`` is ``"within"`` (LORO inside each session), ``"cross"``
    (train on one session, test on each other; the row's session is the
    test session) or ``"both"``.  ``sessions`` may hold raw ``Session`` or
    ``PreparedSession`` objects.
    """
    if protocol not in ("within", "cross", "both"):
        raise ValueError(f"protocol must be within, cross or both; got {protocol!r}")
    preps = [s if isinstance(s, PreparedSession) else prepare_session(s, cfg) for s in sessions]
    if protocol in ("cross", "both") and len(preps) < 2:
        raise ValueError("cross-session evaluation needs at least 2 sessions")
    ids = [p.session_id for p in preps]
    if len(set(ids)) != len(ids):
        raise ValueError(f"session ids must be unique, got {ids}")
    report = EvalReport(config=cfg.to_dict())
    for role in cfg.roles:
        for interval in cfg.intervals:
            data = [build_dataset(p, role, interval) for p in preps]
            if protocol in ("within", "both"):
                for ds in data:
                    report.rows += _within_rows(ds, role, interval, cfg)
            if protocol in ("cross", "both"):
                for a, b in ((a, b) for a in range(len(data)) for b in range(len(data)) if a != b):
                    report.rows += _cross_rows(data[a], data[b], role, interval, cfg)
    return report


# ---------------------------------------------------------------- wait times

@dataclass(frozen=True)
class WaitStats:
    mean: float
    sd: float
    min: float
    max: float
    median: float
    n: int
    edges: np.ndarray = field(repr=False, default=None)
    counts: np.ndarray = field(repr=False, default=None)

    def summary(self) -> str:
        return format_wait_summary(self.mean, self.min, self.max)

    def write_histogram(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("bin_start_s,bin_end_s,count\n")
            for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
                fh.write(f"{lo:.3f},{hi:.3f},{int(c)}\n")
        return path


def format_wait_summary(mean_s: float, min_s: float, max_s: float) -> str:
    return f"{round(mean_s * 1000)} ms ({round(min_s * 1000)}–{round(max_s * 1000)})"


def wait_time_stats(events, bin_s: float = 0.02) -> WaitStats:
    """Descriptive statistics of cue-to-saccade waits (sample SD, ddof=1).

    Accepts ``SaccadeEvent`` objects or plain wait times in seconds;
    NaN waits are ignored.
    """
    w = np.array([getattr(e, "wait_time_s", e) for e in events], float)
    w = w[np.isfinite(w)]
    if w.size == 0:
        raise ValueError("no wait times to summarise")
    lo = math.floor(w.min() / bin_s + 1e-9) * bin_s
    n_bins = max(1, math.ceil((w.max() - lo) / bin_s + 1e-9))
    if lo + n_bins * bin_s <= w.max():
        n_bins += 1
    edges = lo + bin_s * np.arange(n_bins + 1)
    counts, _ = np.histogram(w, edges)
    return WaitStats(float(w.mean()), float(w.std(ddof=1)) if w.size > 1 else 0.0,
                     float(w.min()), float(w.max()), float(np.median(w)), int(w.size),
                     edges, counts)


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True)
class Calibration:
    amplitude_uv: float
    oracle_auc: float
    target_auc: float
    role: str
    interval: str


def _oracle_parts(gen_cfg, cfg: PipelineConfig, role: str, interval: str):
    """Matched-filter scores split into signal (per unit amplitude) and noise parts."""
    from .synthgen import generate_session

    noise_cfg = replace(gen_cfg, erp_amplitude_uv=0.0, direction_amplitude_uv=None)
    sig_cfg = replace(gen_cfg.silent(cardiac=True), erp_amplitude_uv=1.0, direction_amplitude_uv=None)
    noise_sess, _ = generate_session(noise_cfg)
    sig_sess, _ = generate_session(sig_cfg)
    noise_prep = prepare_session(noise_sess, cfg)
    # the noiseless copy reuses the noisy copy's R-peaks and events so epochs align
    clean, _ = clean_signal(sig_sess.neural, cfg, noise_prep.r_peaks)
    sig_prep = replace(noise_prep, signal=clean)
    ds_n = build_dataset(noise_prep, role, interval)
    ds_s = build_dataset(sig_prep, role, interval)
    template = ds_s.X[ds_s.klass == 1].mean(axis=0)
    flat = template.ravel()
    s_sig = ds_s.X.reshape(len(ds_s.X), -1) @ flat
    s_noise = ds_n.X.reshape(len(ds_n.X), -1) @ flat
    return s_sig, s_noise, ds_n.klass


def oracle_onset_auc(gen_cfg, amplitude_uv: float, cfg: PipelineConfig = PipelineConfig(),
                     role: str = "combined", interval: str = "pre+post") -> float:
    s_sig, s_noise, y = _oracle_parts(gen_cfg, cfg, role, interval)
    return auc_roc(amplitude_uv * s_sig + s_noise, y)


def calibrate_onset_amplitude(gen_cfg, target_auc: float = 0.95,
                              cfg: PipelineConfig = PipelineConfig(), role: str = "combined",
                              interval: str = "pre+post", tol: float = 1e-4) -> Calibration:
    """ERP amplitude at which the matched-filter oracle reaches ``target_auc``.

    The generator is linear in the planted amplitude with noise drawn
    independently of it, so the processed session at amplitude a equals
    a * (noiseless unit-amplitude session) + (zero-amplitude session); the
    oracle scores the inner product with the true mean saccade epoch.
    """
    s_sig, s_noise, y = _oracle_parts(gen_cfg, cfg, role, interval)

    def auc(a):
        return auc_roc(a * s_sig + s_noise, y)

    lo, hi = 0.0, 1.0
    while auc(hi) < target_auc:
        lo, hi = hi, hi * 2
        if hi > 1e4:
            raise RuntimeError("oracle never reaches the target AUC")
    while hi - lo > tol * max(hi, 1e-12):
        mid = 0.5 * (lo + hi)
        if auc(mid) < target_auc:
            lo = mid
        else:
            hi = mid
    return Calibration(hi, auc(hi), target_auc, role, interval)
