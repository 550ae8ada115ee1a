"""Shared data model: neural/gaze streams, markers, sessions, labels and epochs.

Units are fixed across the package: microvolts for neural data, seconds for
time, Hz for rates, centimetres from the screen centre for gaze.  Neural
sample times are implicit (``index / fs``); gaze and markers carry explicit
timestamps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class Task(str, enum.Enum):
    VISUALLY_GUIDED = "visually_guided"
    FREE_VIEWING = "free_viewing"


class MarkerKind(str, enum.Enum):
    CUE_ONSET = "cue_onset"
    SACCADE_ONSET = "saccade_onset"
    SACCADE_OFFSET = "saccade_offset"
    FIXATION_START = "fixation_start"
    FIXATION_END = "fixation_end"
    RUN_START = "run_start"
    RUN_END = "run_end"


class Direction(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    UP = "up"
    DOWN = "down"


class Role(str, enum.Enum):
    INITIAL = "initial"
    BACK = "back"
    COMBINED = "combined"


class Klass(str, enum.Enum):
    FIXATION = "fixation"
    SACCADE = "saccade"


DIRECTIONS = (Direction.LEFT, Direction.RIGHT, Direction.UP, Direction.DOWN)

_COMPLEMENT = {
    Direction.LEFT: Direction.RIGHT,
    Direction.RIGHT: Direction.LEFT,
    Direction.UP: Direction.DOWN,
    Direction.DOWN: Direction.UP,
}

# unit screen vectors, y axis pointing up
DIRECTION_VECTORS = {
    Direction.LEFT: (-1.0, 0.0),
    Direction.RIGHT: (1.0, 0.0),
    Direction.UP: (0.0, 1.0),
    Direction.DOWN: (0.0, -1.0),
}


def complement(direction: Direction) -> Direction:
    """Direction of the return saccade paired with ``direction``."""
    return _COMPLEMENT[Direction(direction)]


def _frozen_array(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NeuralSignal:
    """Multichannel neural recording, ``data`` shaped (n_samples, n_channels)."""

    data: np.ndarray
    fs: float
    channel_ids: tuple = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        object.__setattr__(self, "data", _frozen_array(data))
        ids = tuple(self.channel_ids) or tuple(f"ch{i}" for i in range(data.shape[1]))
        object.__setattr__(self, "channel_ids", ids)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs if self.fs > 0 else 0.0

    def replace(self, data=None, fs=None, channel_ids=None) -> "NeuralSignal":
        return NeuralSignal(
            self.data if data is None else data,
            self.fs if fs is None else fs,
            self.channel_ids if channel_ids is None else channel_ids,
        )

    def pick(self, keep: Sequence[str]) -> "NeuralSignal":
        idx = [self.channel_ids.index(c) for c in keep]
        return NeuralSignal(self.data[:, idx], self.fs, tuple(keep))

    def drop(self, exclude: Sequence[str]) -> "NeuralSignal":
        missing = [c for c in exclude if c not in self.channel_ids]
        if missing:
            raise ValueError(f"unknown channels to exclude: {missing}")
        return self.pick([c for c in self.channel_ids if c not in set(exclude)])


@dataclass(frozen=True, eq=False)
class GazeTrack:
    timestamps: np.ndarray
    positions: np.ndarray
    fs_nominal: float

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen_array(self.timestamps))
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", _frozen_array(pos))
        object.__setattr__(self, "fs_nominal", float(self.fs_nominal))

    def deduplicated(self) -> "GazeTrack":
        """Drop samples whose timestamp repeats the previous one."""
        t = self.timestamps
        if t.size == 0:
            return self
        keep = np.ones(t.size, bool)
        keep[1:] = np.diff(t) > 0
        return GazeTrack(t[keep], self.positions[keep], self.fs_nominal)


@dataclass(frozen=True)
class EventMarker:
    time: float
    kind: MarkerKind
    direction: Optional[Direction] = None
    saccade_role: Optional[Role] = None

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "kind", MarkerKind(self.kind))
        if self.direction is not None:
            object.__setattr__(self, "direction", Direction(self.direction))
        if self.saccade_role is not None:
            object.__setattr__(self, "saccade_role", Role(self.saccade_role))


_DIRECTED_KINDS = {MarkerKind.CUE_ONSET, MarkerKind.SACCADE_ONSET, MarkerKind.SACCADE_OFFSET}


@dataclass(frozen=True, eq=False)
class Session:
    neural: NeuralSignal
    gaze: GazeTrack
    markers: tuple
    runs: tuple
    task: Task
    session_id: str = "session"
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(self.markers))
        object.__setattr__(
            self, "runs", tuple((float(s), float(e)) for s, e in self.runs)
        )
        object.__setattr__(self, "task", Task(self.task))

    @property
    def duration(self) -> float:
        return self.neural.duration

    def markers_of(self, kind) -> list:
        kind = MarkerKind(kind)
        return [m for m in self.markers if m.kind == kind]

    def run_index_at(self, t: float) -> int:
        """Index of the run containing time ``t``, or -1 during breaks."""
        for i, (s, e) in enumerate(self.runs):
            if s <= t < e:
                return i
        return -1


@dataclass(frozen=True)
class TrialLabel:
    klass: Klass
    direction: Optional[Direction] = None
    role: Optional[Role] = None
    valid: bool = True
    run_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "klass", Klass(self.klass))
        if self.klass == Klass.FIXATION and (
            self.direction is not None or self.role is not None
        ):
            raise ValueError("fixation labels carry no direction or role")
        if self.direction is not None:
            object.__setattr__(self, "direction", Direction(self.direction))
        if self.role is not None:
            object.__setattr__(self, "role", Role(self.role))


@dataclass(frozen=True, eq=False)
class Epoch:
    data: np.ndarray
    t0_offset: float
    fs: float
    label: TrialLabel
    onset_s: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(np.atleast_2d(self.data)))
        dur = self.data.shape[0] / self.fs
        if not (0.0 <= self.t0_offset <= dur + 1e-12):
            raise ValueError(f"t0_offset {self.t0_offset} outside epoch of {dur} s")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("epoch data must be finite")

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.fs - self.t0_offset


def validate_session(session: Session) -> list[str]:
    """Check every type invariant; return human-readable violations."""
    out = []
    neural = session.neural
    if not neural.fs > 0:
        out.append("neural.fs must be > 0")
    if neural.data.ndim != 2 or neural.n_channels < 1:
        out.append("neural.data must have at least one channel")
    elif not np.all(np.isfinite(neural.data)):
        out.append("neural.data must be finite")
    ids = list(neural.channel_ids)
    if len(ids) != neural.n_channels:
        out.append("neural.channel_ids length must equal n_channels")
    if len(set(ids)) != len(ids):
        out.append("neural.channel_ids must be unique")

    gaze = session.gaze.deduplicated()
    if gaze.timestamps.size > 1 and np.any(np.diff(gaze.timestamps) <= 0):
        out.append("gaze.timestamps must be increasing")
    if not np.all(np.isfinite(session.gaze.positions)):
        out.append("gaze.positions must be finite")

    runs = list(session.runs)
    for s, e in runs:
        if not e > s:
            out.append(f"run [{s}, {e}] must have end > start")
    for (s0, e0), (s1, e1) in zip(runs, runs[1:]):
        if s1 < s0:
            out.append("runs must be ordered")
        if s1 < e0:
            out.append("runs overlap")

    duration = neural.duration
    for m in session.markers:
        if not (0.0 <= m.time <= duration + 1e-9):
            out.append(f"marker {m.kind.value} at {m.time} outside session duration")
        needs_dir = m.kind in _DIRECTED_KINDS
        if needs_dir and m.direction is None:
            out.append(f"marker {m.kind.value} at {m.time} missing direction")
        if not needs_dir and m.direction is not None:
            out.append(f"marker {m.kind.value} at {m.time} must not carry a direction")
    return out
