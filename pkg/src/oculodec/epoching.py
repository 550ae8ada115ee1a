"""Gaze-based saccade detection, trial labelling and epoch extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    DIRECTION_VECTORS,
    Direction,
    Epoch,
    GazeTrack,
    Klass,
    NeuralSignal,
    Role,
    Task,
    TrialLabel,
    complement,
)

DIST_FRACTION = 0.2
SPEED_CM_S = 10.0
MAX_GAP_S = 0.2
MAX_TRIAL_S = {Task.VISUALLY_GUIDED: 10.0, Task.FREE_VIEWING: 6.5}

WINDOWS = {
    "full": (-0.5, 0.5),
    "pre+post": (-0.25, 0.25),
    "pre": (-0.5, 0.0),
    "post": (0.0, 0.5),
}


@dataclass(frozen=True)
class EpochConfig:
    window: tuple = (-0.5, 0.5)

    def __post_init__(self):
        t0, t1 = self.window
        if not t0 < t1:
            raise ValueError(f"window start {t0} must precede end {t1}")

    @classmethod
    def named(cls, name: str) -> "EpochConfig":
        return cls(WINDOWS[name])

    @property
    def length(self) -> float:
        return self.window[1] - self.window[0]


@dataclass(frozen=True)
class SaccadeEvent:
    onset_s: float
    offset_s: float
    direction: Direction
    role: Role
    amplitude_cm: float
    trial_index: int
    run_index: int = -1
    wait_time_s: float = math.nan
    valid: bool = True
    start: tuple = (0.0, 0.0)
    target: tuple = (0.0, 0.0)


def default_targets(eccentricity_cm: float = 8.5) -> np.ndarray:
    pts = [(0.0, 0.0)] + [tuple(eccentricity_cm * np.array(v)) for v in DIRECTION_VECTORS.values()]
    return np.array(pts)


def axis_direction(dx: float, dy: float) -> Direction:
    """Dominant-axis sign rule; y grows upward."""
    if abs(dx) >= abs(dy):
        return Direction.RIGHT if dx > 0 else Direction.LEFT
    return Direction.UP if dy > 0 else Direction.DOWN


def _run_of(t: float, runs) -> int:
    for i, (s, e) in enumerate(runs or ()):
        if s <= t < e:
            return i
    return -1


def detect_saccade_onsets(gaze: GazeTrack, targets=None, cues=None, runs=None,
                          dist_fraction: float = DIST_FRACTION,
                          speed_threshold: float = SPEED_CM_S,
                          max_gap_s: float = MAX_GAP_S) -> list[SaccadeEvent]:
    """Detect saccades between known fixation targets from a gaze track.

    The onset is the first sample that is both farther than ``dist_fraction``
    of the start-to-target distance from the start point and moving faster
    than ``speed_threshold``; the offset is the first later sample within
    that same fraction of the target.  A gap longer than ``max_gap_s`` inside
    a saccade marks it invalid.
    """
    gaze = gaze.deduplicated()
    t, p = gaze.timestamps, gaze.positions
    n = t.size
    targets = default_targets() if targets is None else np.asarray(targets, float)
    centre = int(np.argmin(np.linalg.norm(targets, axis=1)))
    cues = np.sort(np.asarray(cues if cues is not None else [], float))
    if n < 2:
        return []

    dt = np.diff(t)
    speed = np.zeros(n)
    speed[1:] = np.linalg.norm(np.diff(p, axis=0), axis=1) / dt

    def nearest(q):
        return int(np.argmin(np.linalg.norm(targets - q, axis=1)))

    anchor = nearest(p[0])
    events: list[SaccadeEvent] = []
    trial = -1
    last_back_t = -math.inf
    i = 1
    while i < n:
        if speed[i] <= speed_threshold:
            i += 1
            continue
        j = i
        while j < n - 1 and speed[j] > speed_threshold and t[j] - t[i] < 0.5:
            j += 1
        dest = nearest(p[j])
        A, B = targets[anchor], targets[dest]
        span = float(np.linalg.norm(B - A))
        if dest == anchor or np.linalg.norm(p[i] - A) <= dist_fraction * span:
            i += 1
            continue
        # offset: first sample after the onset that lies near the target
        k = i + 1
        while k < n and np.linalg.norm(p[k] - B) >= dist_fraction * span and t[k] - t[i] < 1.0:
            k += 1
        reached = k < n and np.linalg.norm(p[k] - B) < dist_fraction * span
        k = min(k, n - 1)
        gap = float(np.max(dt[max(i - 1, 0):k])) if k > i - 1 else 0.0
        valid = reached and gap <= max_gap_s

        role = Role.INITIAL if anchor == centre else Role.BACK
        if role == Role.INITIAL:
            trial += 1
        wait = math.nan
        if role == Role.INITIAL and cues.size:
            prior = cues[(cues <= t[i]) & (cues > last_back_t)]
            if prior.size:
                wait = float(t[i] - prior[-1])
        d = B - A
        events.append(SaccadeEvent(
            onset_s=float(t[i]), offset_s=float(t[k]),
            direction=axis_direction(d[0], d[1]), role=role, amplitude_cm=span,
            trial_index=max(trial, 0), run_index=_run_of(float(t[i]), runs),
            wait_time_s=wait, valid=valid, start=tuple(A), target=tuple(B),
        ))
        if role == Role.BACK:
            last_back_t = float(t[i])
        anchor = dest
        i = max(k, i + 1)
    return events


def label_trials(events: Sequence[SaccadeEvent], task, cues=None,
                 max_trial_s: Optional[float] = None) -> list[TrialLabel]:
    """One label per event, paired initial/back saccades sharing validity.

    The back saccade is labelled with the complement of its initial
    direction.  A trial is invalid when either saccade was flagged or it
    outlasts the task's maximum duration (measured from the cue in the
    visually guided task, from the initial onset otherwise).
    """
    task = Task(task)
    limit = MAX_TRIAL_S[task] if max_trial_s is None else max_trial_s
    by_trial: dict[int, list[int]] = {}
    for idx, ev in enumerate(events):
        by_trial.setdefault(ev.trial_index, []).append(idx)

    labels: list[Optional[TrialLabel]] = [None] * len(events)
    for _, members in sorted(by_trial.items()):
        initial = next((events[i] for i in members if events[i].role == Role.INITIAL), None)
        back = next((events[i] for i in members if events[i].role == Role.BACK), None)
        ok = all(events[i].valid for i in members)
        if initial is not None and back is not None:
            start = initial.onset_s
            if task == Task.VISUALLY_GUIDED and not math.isnan(initial.wait_time_s):
                start -= initial.wait_time_s
            if back.offset_s - start > limit:
                ok = False
        for i in members:
            ev = events[i]
            if ev.role == Role.BACK and initial is not None:
                direction = complement(initial.direction)
            else:
                direction = ev.direction
            labels[i] = TrialLabel(Klass.SACCADE, direction, ev.role, ok, ev.run_index)
    return labels


def select_role(events, labels, role) -> list[tuple[float, TrialLabel]]:
    """(onset, label) pairs for one analysis role; combined keeps every saccade."""
    role = Role(role)
    out = []
    for ev, lab in zip(events, labels):
        if role == Role.COMBINED:
            out.append((ev.onset_s, replace(lab, role=Role.COMBINED)))
        elif lab.role == role:
            out.append((ev.onset_s, lab))
    return out


def _straddles(i0: int, i1: int, fs: float, runs) -> bool:
    if not runs:
        return False
    s, e = i0 / fs, i1 / fs
    return not any(rs <= s and e <= re_ for rs, re_ in runs)


def extract_epochs(signal: NeuralSignal, items: Iterable[tuple[float, TrialLabel]],
                   cfg: EpochConfig = EpochConfig(), runs=None):
    """Cut one epoch per valid event; returns ``(epochs, n_dropped)``.

    Events whose window leaves the recording, or crosses a run boundary
    when ``runs`` is given, are dropped and counted.
    """
    fs = signal.fs
    t_start, t_end = cfg.window
    n = int(round((t_end - t_start) * fs))
    epochs, dropped = [], 0
    for t, lab in items:
        if not lab.valid:
            continue
        i0 = int(round((t + t_start) * fs))
        i1 = i0 + n
        if i0 < 0 or i1 > signal.n_samples or _straddles(i0, i1, fs, runs):
            dropped += 1
            continue
        epochs.append(Epoch(signal.data[i0:i1], -t_start, fs, lab, float(t)))
    return epochs, dropped


def fixation_starts(interval, n_needed: int, epoch_len: float) -> np.ndarray:
    s, e = interval
    total = e - s
    if total < epoch_len:
        raise ValueError(f"fixation interval of {total:.3f} s shorter than epoch of {epoch_len} s")
    if n_needed < 1:
        return np.array([])
    if n_needed == 1:
        return np.array([s + (total - epoch_len) / 2])
    stride = (total - epoch_len) / (n_needed - 1)
    return s + stride * np.arange(n_needed)


def extract_fixation_epochs(signal: NeuralSignal, fixation_intervals, n_needed: int,
                            epoch_len: float, task=Task.FREE_VIEWING, run_index=0,
                            t0_offset: Optional[float] = None) -> list[Epoch]:
    """Fixation epochs for the negative class.

    Free viewing: ``n_needed`` windows sliding over the fixation block with
    stride ``(total - epoch_len) / (n_needed - 1)``; overlap is allowed.
    Visually guided: one window centred in each pre-cue fixation interval.
    ``run_index`` may be an int or one value per interval.
    """
    fs = signal.fs
    n = int(round(epoch_len * fs))
    t0 = epoch_len / 2 if t0_offset is None else t0_offset
    intervals = list(fixation_intervals)
    runs = (list(run_index) if np.ndim(run_index) else [run_index] * len(intervals))
    starts: list[tuple[float, int]] = []
    if Task(task) == Task.FREE_VIEWING:
        for iv, r in zip(intervals, runs):
            starts += [(s, r) for s in fixation_starts(iv, n_needed, epoch_len)]
    else:
        for iv, r in zip(intervals, runs):
            starts += [(s, r) for s in fixation_starts(iv, 1, epoch_len)]
    out = []
    for s, r in starts:
        i0 = int(round(s * fs))
        if i0 < 0 or i0 + n > signal.n_samples:
            continue
        out.append(Epoch(signal.data[i0:i0 + n], t0, fs, TrialLabel(Klass.FIXATION, run_index=r),
                         s + t0))
    return out
