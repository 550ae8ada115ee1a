"""Deterministic synthetic sessions with planted ground truth.

Neural data are ``A @ S(t)`` plus a rank-1 cardiac artefact, 50 Hz line
noise, pink noise and white noise.  The source matrix ``S`` holds

* a saccadic-potential source: an asymmetric raised-cosine pulse over
  [-50, +200] ms around every saccade onset, peaking at +50 ms;
* a direction source: the same pulse scaled and shifted per direction;
* a P300 source (visually guided task only) peaking 350 ms after each cue;
* ``n_background`` super-Gaussian background sources.

Every random stream is spawned from one seed and always consumed in the same
order, so zeroing an amplitude never changes the other components.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal as sps

from .core import (
    DIRECTION_VECTORS,
    DIRECTIONS,
    Direction,
    EventMarker,
    GazeTrack,
    MarkerKind,
    NeuralSignal,
    Role,
    Session,
    Task,
    complement,
)

SOURCE_SACCADE, SOURCE_DIRECTION, SOURCE_P300 = 0, 1, 2
N_TASK_SOURCES = 3

DEFAULT_GAINS = {"left": 1.0, "right": 0.9, "up": 1.15, "down": 0.85}
DEFAULT_LATENCIES_MS = {"left": -10.0, "right": 10.0, "up": -5.0, "down": 5.0}

# Kellet's economy pink-noise shaping filter (-10 dB/decade)
_PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
_PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])


@dataclass(frozen=True)
class CardiacConfig:
    rate_hz: float = 1.1
    amplitude_uv: float = 20.0
    qrs_width_ms: float = 80.0
    rr_jitter: float = 0.03
    gain_jitter: float = 0.1


@dataclass(frozen=True)
class WaitTimeConfig:
    mean: float = 0.626
    sd: float = 0.103
    min: float = 0.414
    max: float = 0.935


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    duration_s: Optional[float] = None
    fs_neural: float = 2000.0
    fs_gaze: float = 60.0
    n_channels: int = 13
    n_background: int = 2
    mixing: Optional[tuple] = None
    task: str = "free_viewing"
    n_runs: int = 3
    n_trials_per_direction: int = 36
    erp_amplitude_uv: float = 4.0
    direction_amplitude_uv: Optional[float] = None
    p300_amplitude_uv: float = 6.0
    background_uv: float = 3.0
    direction_gains: dict = field(default_factory=lambda: dict(DEFAULT_GAINS))
    direction_latencies_ms: dict = field(default_factory=lambda: dict(DEFAULT_LATENCIES_MS))
    cardiac: CardiacConfig = CardiacConfig()
    line_noise_uv: float = 10.0
    pink_noise_uv: float = 4.0
    white_noise_uv: float = 3.0
    wait_time: WaitTimeConfig = WaitTimeConfig()
    target_eccentricity_cm: float = 8.5
    saccade_ms: float = 20.0
    gaze_jitter_cm: float = 0.05
    blink_prob: float = 0.0
    fixation_block_s: float = 15.0
    vg_fixation_s: float = 1.5
    lead_in_s: float = 5.0
    inter_run_s: float = 5.0
    session_id: Optional[str] = None

    @property
    def n_sources(self) -> int:
        return N_TASK_SOURCES + self.n_background

    def silent(self, cardiac=True) -> "GenConfig":
        """Same timeline with every noise term zeroed (and optionally cardiac)."""
        return replace(
            self,
            background_uv=0.0, line_noise_uv=0.0, pink_noise_uv=0.0, white_noise_uv=0.0,
            cardiac=replace(self.cardiac, amplitude_uv=0.0) if cardiac else self.cardiac,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.mixing is not None:
            d["mixing"] = np.asarray(self.mixing).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        if "cardiac" in d and isinstance(d["cardiac"], dict):
            d["cardiac"] = CardiacConfig(**d["cardiac"])
        if "wait_time" in d and isinstance(d["wait_time"], dict):
            d["wait_time"] = WaitTimeConfig(**d["wait_time"])
        if d.get("mixing") is not None:
            d["mixing"] = tuple(map(tuple, d["mixing"]))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    sources: np.ndarray            # (n_samples, n_sources)
    mixing: np.ndarray             # (n_channels, n_sources)
    onsets: np.ndarray             # every planted saccade onset, sorted
    directions: tuple
    roles: tuple
    trial_index: np.ndarray
    run_index: np.ndarray
    r_peaks: np.ndarray
    cue_times: np.ndarray          # per trial, VG only (NaN for FV)
    wait_times: np.ndarray         # per trial, VG only
    cardiac_gains: np.ndarray
    fs: float

    def to_json(self) -> dict:
        return {
            "onsets": self.onsets.tolist(),
            "directions": [d.value for d in self.directions],
            "roles": [r.value for r in self.roles],
            "trial_index": self.trial_index.tolist(),
            "run_index": self.run_index.tolist(),
            "r_peaks": self.r_peaks.tolist(),
            "wait_times": [None if math.isnan(w) else w for w in self.wait_times],
            "mixing": {"shape": list(self.mixing.shape), "data": self.mixing.ravel().tolist()},
            "cardiac_gains": self.cardiac_gains.tolist(),
        }


def saccade_template(t) -> np.ndarray:
    """Unit-peak raised-cosine pulse: 0 before -50 ms, 1 at +50 ms, 0 after +200 ms."""
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    rise = (t >= -0.05) & (t < 0.05)
    fall = (t >= 0.05) & (t <= 0.2)
    out[rise] = 0.5 * (1 - np.cos(np.pi * (t[rise] + 0.05) / 0.1))
    out[fall] = 0.5 * (1 + np.cos(np.pi * (t[fall] - 0.05) / 0.15))
    return out


def p300_template(t) -> np.ndarray:
    """Raised cosine over [200, 500] ms after the cue, peaking at 350 ms."""
    t = np.asarray(t, float)
    inside = (t >= 0.2) & (t <= 0.5)
    out = np.zeros_like(t)
    out[inside] = 0.5 * (1 + np.cos(np.pi * (t[inside] - 0.35) / 0.15))
    return out


def cardiac_waveform(t, width_s: float) -> np.ndarray:
    """Biphasic triangular QRS-like pulse: +1 peak at 0, -0.3 trough at width/2."""
    t = np.asarray(t, float)
    q = width_s / 4.0
    pos = np.clip(1 - np.abs(t) / q, 0, None)
    neg = -0.3 * np.clip(1 - np.abs(t - 2 * q) / q, 0, None)
    return pos + neg


def default_mixing(n_channels: int, n_sources: int, rng) -> np.ndarray:
    a = rng.normal(size=(n_channels, n_sources))
    a += 0.5 * rng.normal(size=(1, n_sources))  # shared component: channels correlate
    return a / np.sqrt(np.mean(a**2, axis=0))


def validate_config(cfg: GenConfig, mixing: np.ndarray) -> None:
    problems = []
    if cfg.fs_neural <= 0 or cfg.fs_gaze <= 0:
        problems.append("sampling rates must be positive")
    if cfg.n_runs < 3:
        problems.append(f"n_runs must be >= 3 (got {cfg.n_runs})")
    if cfg.n_trials_per_direction < 1:
        problems.append("n_trials_per_direction must be >= 1")
    if cfg.n_trials_per_direction * 4 < cfg.n_runs:
        problems.append("need at least one trial per run")
    if Task(cfg.task) not in tuple(Task):
        problems.append(f"unknown task {cfg.task}")
    amps = {
        "erp_amplitude_uv": cfg.erp_amplitude_uv,
        "p300_amplitude_uv": cfg.p300_amplitude_uv,
        "background_uv": cfg.background_uv,
        "line_noise_uv": cfg.line_noise_uv,
        "pink_noise_uv": cfg.pink_noise_uv,
        "white_noise_uv": cfg.white_noise_uv,
        "cardiac.amplitude_uv": cfg.cardiac.amplitude_uv,
    }
    if cfg.direction_amplitude_uv is not None:
        amps["direction_amplitude_uv"] = cfg.direction_amplitude_uv
    problems += [f"{k} must be >= 0" for k, v in amps.items() if v < 0]
    w = cfg.wait_time
    if not (w.min <= w.mean <= w.max) or w.sd < 0:
        problems.append("wait_time requires min <= mean <= max and sd >= 0")
    if cfg.cardiac.rate_hz <= 0:
        problems.append("cardiac.rate_hz must be positive")
    if set(cfg.direction_gains) != {d.value for d in DIRECTIONS}:
        problems.append("direction_gains must name left/right/up/down")
    if mixing.shape != (cfg.n_channels, cfg.n_sources):
        problems.append(
            f"mixing must be {cfg.n_channels}x{cfg.n_sources}, got {mixing.shape}"
        )
    elif np.linalg.matrix_rank(mixing) < cfg.n_sources:
        problems.append("mixing matrix must have full column rank")
    if problems:
        raise ValueError("invalid GenConfig: " + "; ".join(problems))


def _truncated_normal(rng, w: WaitTimeConfig, n: int) -> np.ndarray:
    out = np.empty(n)
    for i in range(n):
        while True:
            v = rng.normal(w.mean, w.sd) if w.sd > 0 else w.mean
            if w.min <= v <= w.max:
                out[i] = v
                break
    return out


@dataclass
class _Trial:
    run: int
    direction: Direction
    cue: float
    initial: float
    back: float
    fixation: tuple  # (start, end) of the preceding fixation, VG only
    blink: bool


def _layout(cfg: GenConfig, rng):
    """Lay out runs and trials; returns (runs, trials, fixation_blocks, end_time)."""
    task = Task(cfg.task)
    per_dir = [np.array_split(np.arange(cfg.n_trials_per_direction), cfg.n_runs)
               for _ in DIRECTIONS]
    waits = _truncated_normal(rng, cfg.wait_time, 4 * cfg.n_trials_per_direction)
    wait_iter = iter(waits)
    runs, trials, fix_blocks = [], [], []
    t = cfg.lead_in_s
    for r in range(cfg.n_runs):
        seq = [d for d, parts in zip(DIRECTIONS, per_dir) for _ in parts[r]]
        seq = [seq[i] for i in rng.permutation(len(seq))]
        start = t
        if task == Task.FREE_VIEWING:
            fix_blocks.append((t, t + cfg.fixation_block_s))
            t += cfg.fixation_block_s + 0.5
        for d in seq:
            if task == Task.VISUALLY_GUIDED:
                fix = (t, t + cfg.vg_fixation_s)
                cue = fix[1]
                initial = cue + next(wait_iter)
            else:
                fix = (math.nan, math.nan)
                cue = math.nan
                initial = t + rng.uniform(0.8, 1.6)
            back = initial + cfg.saccade_ms / 1000 + rng.uniform(0.6, 1.0)
            blink = bool(rng.random() < cfg.blink_prob)
            trials.append(_Trial(r, d, cue, initial, back, fix, blink))
            t = back + cfg.saccade_ms / 1000 + rng.uniform(0.3, 0.6)
        t += 1.0
        runs.append((start, t))
        t += cfg.inter_run_s
    return runs, trials, fix_blocks, t


def _add_pulses(dest, fs, times, amps, template, support):
    lo, hi = support
    n = dest.shape[0]
    for t0, a in zip(times, amps):
        if a == 0:
            continue
        i0 = max(0, int(math.floor((t0 + lo) * fs)))
        i1 = min(n, int(math.ceil((t0 + hi) * fs)) + 1)
        if i1 <= i0:
            continue
        dest[i0:i1] += a * template(np.arange(i0, i1) / fs - t0)


def _gaze(cfg: GenConfig, trials, duration, rng):
    fs = cfg.fs_gaze
    ts = np.arange(int(math.floor(duration * fs))) / fs
    pos = np.zeros((ts.size, 2))
    ramp = cfg.saccade_ms / 1000
    ecc = cfg.target_eccentricity_cm
    for tr in trials:
        target = ecc * np.array(DIRECTION_VECTORS[tr.direction])
        go = np.clip((ts - tr.initial) / ramp, 0, 1)
        ret = np.clip((ts - tr.back) / ramp, 0, 1)
        pos += np.outer(go - ret, target)
    pos += rng.normal(0, cfg.gaze_jitter_cm, size=pos.shape)
    keep = np.ones(ts.size, bool)
    for tr in trials:
        if tr.blink:
            keep &= ~((ts > tr.initial - 0.1) & (ts < tr.initial + 0.25))
    return GazeTrack(ts[keep], pos[keep], fs)


def generate_session(cfg: GenConfig) -> tuple[Session, GroundTruth]:
    """Synthesize a session and the ground truth it was built from."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(8)]
    (rng_time, rng_mix, rng_card, rng_bg, rng_pink, rng_white, rng_line, rng_gaze) = streams
    task = Task(cfg.task)

    mixing = (np.asarray(cfg.mixing, float) if cfg.mixing is not None
              else default_mixing(cfg.n_channels, cfg.n_sources, rng_mix))
    validate_config(cfg, mixing)

    runs, trials, fix_blocks, needed = _layout(cfg, rng_time)
    if cfg.duration_s is not None and cfg.duration_s < needed:
        raise ValueError(
            f"duration_s={cfg.duration_s} too short for {len(trials)} trials in "
            f"{cfg.n_runs} runs; at least {needed:.3f} s required"
        )
    duration = cfg.duration_s if cfg.duration_s is not None else needed
    fs = cfg.fs_neural
    n = int(round(duration * fs))

    # planted saccades: initial and back per trial, already time-ordered
    onsets, dirs, roles, trial_idx, run_idx = [], [], [], [], []
    for k, tr in enumerate(trials):
        for t0, d, role in ((tr.initial, tr.direction, Role.INITIAL),
                            (tr.back, complement(tr.direction), Role.BACK)):
            onsets.append(t0)
            dirs.append(d)
            roles.append(role)
            trial_idx.append(k)
            run_idx.append(tr.run)
    onsets = np.array(onsets)

    S = np.zeros((n, cfg.n_sources))
    _add_pulses(S[:, SOURCE_SACCADE], fs, onsets,
                np.full(onsets.size, cfg.erp_amplitude_uv), saccade_template, (-0.05, 0.2))
    dir_amp = (cfg.erp_amplitude_uv if cfg.direction_amplitude_uv is None
               else cfg.direction_amplitude_uv)
    for d in DIRECTIONS:
        sel = np.array([x == d for x in dirs])
        lat = cfg.direction_latencies_ms[d.value] / 1000
        _add_pulses(S[:, SOURCE_DIRECTION], fs, onsets[sel] + lat,
                    np.full(sel.sum(), dir_amp * cfg.direction_gains[d.value]),
                    saccade_template, (-0.05, 0.2))
    cues = np.array([tr.cue for tr in trials])
    if task == Task.VISUALLY_GUIDED:
        _add_pulses(S[:, SOURCE_P300], fs, cues,
                    np.full(cues.size, cfg.p300_amplitude_uv), p300_template, (0.2, 0.5))

    # background: heavy-tailed innovations through a two-pole 3 Hz lowpass, unit RMS
    pole = math.exp(-2 * math.pi * 3.0 / fs)
    for j in range(N_TASK_SOURCES, cfg.n_sources):
        e = rng_bg.laplace(size=n)
        b = sps.lfilter([1.0], [1.0, -2 * pole, pole * pole], e)
        scale = np.sqrt(np.mean(b**2)) if n else 1.0
        S[:, j] = cfg.background_uv * b / (scale if scale > 0 else 1.0)

    X = S @ mixing.T

    # cardiac: one waveform, per-channel gains
    rr_mean = 1.0 / cfg.cardiac.rate_hz
    peaks, t = [], rng_card.uniform(0.2, rr_mean + 0.2)
    while t < duration - 0.2:
        peaks.append(t)
        t += rr_mean * (1 + cfg.cardiac.rr_jitter * rng_card.normal())
    r_peaks = np.array(peaks)
    gains = 1 + cfg.cardiac.gain_jitter * rng_card.normal(size=cfg.n_channels)
    if cfg.cardiac.amplitude_uv > 0:
        wave = np.zeros(n)
        width = cfg.cardiac.qrs_width_ms / 1000
        _add_pulses(wave, fs, r_peaks, np.ones(r_peaks.size),
                    lambda tt: cardiac_waveform(tt, width), (-width / 4, 3 * width / 4))
        X += cfg.cardiac.amplitude_uv * np.outer(wave, gains)

    tt = np.arange(n) / fs
    line_phase = rng_line.uniform(0, 2 * np.pi, size=cfg.n_channels)
    for c in range(cfg.n_channels):
        pink = sps.lfilter(_PINK_B, _PINK_A, rng_pink.normal(size=n))
        rms = np.sqrt(np.mean(pink**2)) if n else 1.0
        white = rng_white.normal(size=n)
        if cfg.pink_noise_uv:
            X[:, c] += cfg.pink_noise_uv * pink / rms
        if cfg.white_noise_uv:
            X[:, c] += cfg.white_noise_uv * white
        if cfg.line_noise_uv:
            X[:, c] += cfg.line_noise_uv * np.sin(2 * np.pi * 50.0 * tt + line_phase[c])

    gaze = _gaze(cfg, trials, duration, rng_gaze)

    markers = []
    for r, (s, e) in enumerate(runs):
        markers.append(EventMarker(s, MarkerKind.RUN_START))
        markers.append(EventMarker(e, MarkerKind.RUN_END))
    for s, e in fix_blocks:
        markers.append(EventMarker(s, MarkerKind.FIXATION_START))
        markers.append(EventMarker(e, MarkerKind.FIXATION_END))
    offset = cfg.saccade_ms / 1000
    for tr in trials:
        if task == Task.VISUALLY_GUIDED:
            markers.append(EventMarker(tr.fixation[0], MarkerKind.FIXATION_START))
            markers.append(EventMarker(tr.fixation[1], MarkerKind.FIXATION_END))
            markers.append(EventMarker(tr.cue, MarkerKind.CUE_ONSET, tr.direction))
    for t0, d, role in zip(onsets, dirs, roles):
        markers.append(EventMarker(t0, MarkerKind.SACCADE_ONSET, d, role))
        markers.append(EventMarker(t0 + offset, MarkerKind.SACCADE_OFFSET, d, role))
    markers.sort(key=lambda m: (m.time, m.kind.value))

    channel_ids = tuple(f"ch{i + 1:02d}" for i in range(cfg.n_channels))
    session = Session(
        NeuralSignal(X, fs, channel_ids), gaze, markers, runs, task,
        cfg.session_id or f"synth-{cfg.seed}", cfg.seed,
    )
    waits = np.array([tr.initial - tr.cue for tr in trials])
    truth = GroundTruth(
        sources=S, mixing=mixing, onsets=onsets, directions=tuple(dirs),
        roles=tuple(roles), trial_index=np.array(trial_idx), run_index=np.array(run_idx),
        r_peaks=r_peaks, cue_times=cues, wait_times=waits, cardiac_gains=gains, fs=fs,
    )
    return session, truth


def write_ground_truth(truth: GroundTruth, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(truth.to_json(), indent=1) + "\n")
    return path
