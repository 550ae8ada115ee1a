"""On-disk formats: session directories, epoch stores, matrices in JSON.

Session directory layout::

    meta.json     {session_id, task, fs_neural, n_channels, channel_ids,
                   fs_gaze_nominal, runs, seed}
    neural.f32    little-endian float32, sample-major
    gaze.csv      t,x_cm,y_cm
    markers.csv   t,kind,direction,role
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    Epoch,
    EventMarker,
    GazeTrack,
    Klass,
    NeuralSignal,
    Session,
    TrialLabel,
)

F32 = np.dtype("<f4")


def _num(x: float) -> str:
    return repr(float(x))


def write_session(session: Session, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    neural = session.neural
    meta = {
        "session_id": session.session_id,
        "task": session.task.value,
        "fs_neural": neural.fs,
        "n_channels": neural.n_channels,
        "channel_ids": list(neural.channel_ids),
        "fs_gaze_nominal": session.gaze.fs_nominal,
        "runs": [[s, e] for s, e in session.runs],
    }
    if session.seed is not None:
        meta["seed"] = session.seed
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    np.ascontiguousarray(neural.data, dtype=F32).tofile(path / "neural.f32")

    with open(path / "gaze.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x_cm", "y_cm"])
        for t, (x, y) in zip(session.gaze.timestamps, session.gaze.positions):
            w.writerow([_num(t), _num(x), _num(y)])

    with open(path / "markers.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "kind", "direction", "role"])
        for m in session.markers:
            w.writerow([
                _num(m.time),
                m.kind.value,
                m.direction.value if m.direction else "",
                m.saccade_role.value if m.saccade_role else "",
            ])
    return path


def read_session(path) -> Session:
    path = Path(path)
    if not (path / "meta.json").exists():
        raise FileNotFoundError(f"no session at {path} (meta.json missing)")
    meta = json.loads((path / "meta.json").read_text())
    n_ch = int(meta["n_channels"])
    raw = np.fromfile(path / "neural.f32", dtype=F32)
    if raw.size % n_ch:
        raise ValueError(f"neural.f32 size {raw.size} not a multiple of {n_ch} channels")
    neural = NeuralSignal(
        raw.reshape(-1, n_ch).astype(float), meta["fs_neural"], tuple(meta["channel_ids"])
    )

    ts, pos = [], []
    with open(path / "gaze.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row["t"]))
            pos.append((float(row["x_cm"]), float(row["y_cm"])))
    gaze = GazeTrack(np.array(ts), np.array(pos).reshape(-1, 2), meta["fs_gaze_nominal"])

    markers = []
    with open(path / "markers.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            markers.append(EventMarker(
                float(row["t"]), row["kind"], row["direction"] or None, row["role"] or None
            ))
    return Session(
        neural, gaze, markers, [tuple(r) for r in meta["runs"]], meta["task"],
        meta["session_id"], meta.get("seed"),
    )


def write_epochs(epochs: list[Epoch], path) -> Path:
    """Store epochs as epochs.f32 + labels.csv + epochs.json (shape, fs, t0)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not epochs:
        raise ValueError("no epochs to write")
    shape = epochs[0].data.shape
    if any(e.data.shape != shape for e in epochs):
        raise ValueError("epochs must share one shape")
    stack = np.stack([e.data for e in epochs]).astype(F32)
    stack.tofile(path / "epochs.f32")
    meta = {
        "n_epochs": len(epochs),
        "n_samples": shape[0],
        "n_channels": shape[1],
        "fs": epochs[0].fs,
        "t0_offset": epochs[0].t0_offset,
        "onsets": [e.onset_s for e in epochs],
    }
    (path / "epochs.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(path / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["idx", "klass", "direction", "role", "valid", "run"])
        for i, e in enumerate(epochs):
            lab = e.label
            w.writerow([
                i, lab.klass.value,
                lab.direction.value if lab.direction else "",
                lab.role.value if lab.role else "",
                int(lab.valid), lab.run_index,
            ])
    return path


def read_epochs(path) -> list[Epoch]:
    path = Path(path)
    meta = json.loads((path / "epochs.json").read_text())
    shape = (meta["n_epochs"], meta["n_samples"], meta["n_channels"])
    data = np.fromfile(path / "epochs.f32", dtype=F32).reshape(shape).astype(float)
    labels = []
    with open(path / "labels.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            klass = Klass(row["klass"])
            labels.append(TrialLabel(
                klass, row["direction"] or None, row["role"] or None,
                bool(int(row["valid"])), int(row["run"]),
            ))
    onsets = meta.get("onsets") or [float("nan")] * shape[0]
    return [
        Epoch(d, meta["t0_offset"], meta["fs"], lab, float(o) if o is not None else float("nan"))
        for d, lab, o in zip(data, labels, onsets)
    ]


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return {"shape": list(m.shape), "data": m.ravel(order="C").tolist()}


def matrix_from_json(obj) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance(config, seed=None) -> dict:
    return {"tool": "oculodec", "version": __version__, "seed": seed,
            "config_hash": config_hash(config)}
