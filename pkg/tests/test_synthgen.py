import filecmp
import json

import numpy as np
import pytest
from dataclasses import replace

from oculodec.core import DIRECTION_VECTORS, MarkerKind, Role
from oculodec.io import write_session
from oculodec.synthgen import (
    CardiacConfig, GenConfig, WaitTimeConfig, generate_session, saccade_template, write_ground_truth,
)
from tests.conftest import short_config


def test_cardiac_only_is_rank_one():
    cfg = replace(short_config(erp_amplitude_uv=0.0, direction_amplitude_uv=0.0,
                               p300_amplitude_uv=0.0).silent(cardiac=False),
                  cardiac=CardiacConfig(amplitude_uv=10.0))
    session, truth = generate_session(cfg)
    X = session.neural.data
    active = np.any(X != 0, axis=1)
    assert active.any()
    s = np.linalg.svd(X[active], compute_uv=False)
    assert s[1] <= 1e-10 * s[0]
    # nonzero only near planted R-peaks
    t = np.flatnonzero(active) / session.neural.fs
    assert np.min(np.abs(t[:, None] - truth.r_peaks[None]), axis=1).max() <= 0.08


def test_same_seed_gives_identical_bytes(tmp_path):
    cfg = short_config(seed=42)
    a = write_session(generate_session(cfg)[0], tmp_path / "a")
    b = write_session(generate_session(cfg)[0], tmp_path / "b")
    for name in ("meta.json", "neural.f32", "gaze.csv", "markers.csv"):
        assert filecmp.cmp(a / name, b / name, shallow=False)
    c = generate_session(replace(cfg, seed=43))[0]
    assert not np.array_equal(c.neural.data, generate_session(cfg)[0].neural.data)


def test_event_counts_match_markers():
    cfg = GenConfig(seed=1, fs_neural=256.0, n_trials_per_direction=12)
    session, truth = generate_session(cfg)
    assert truth.onsets.size == 96
    assert sum(r == Role.INITIAL for r in truth.roles) == 48
    onset_markers = session.markers_of(MarkerKind.SACCADE_ONSET)
    assert len(onset_markers) == 96
    got = sorted((m.time, m.direction, m.saccade_role) for m in onset_markers)
    want = sorted(zip(truth.onsets, truth.directions, truth.roles))
    assert got == want


def test_pseudo_inverse_recovers_sources():
    cfg = GenConfig(seed=3, fs_neural=500.0, task="visually_guided",
                    n_trials_per_direction=6).silent(cardiac=True)
    cfg = replace(cfg, background_uv=2.0)
    session, truth = generate_session(cfg)
    S_hat = session.neural.data @ np.linalg.pinv(truth.mixing).T
    err = np.linalg.norm(S_hat - truth.sources) / np.linalg.norm(truth.sources)
    assert err <= 1e-6


def test_wait_times_are_truncated_normal():
    w = WaitTimeConfig()
    cfg = GenConfig(seed=5, fs_neural=128.0, task="visually_guided", n_trials_per_direction=50,
                    fixation_block_s=5.0)
    _, truth = generate_session(cfg)
    waits = truth.wait_times
    assert waits.size >= 200
    assert waits.min() >= w.min and waits.max() <= w.max
    assert abs(waits.mean() - w.mean) <= 3 * w.sd / np.sqrt(waits.size)


def test_gaze_leaves_start_point_quickly():
    cfg = GenConfig(seed=9, fs_neural=128.0, n_trials_per_direction=12)
    session, truth = generate_session(cfg)
    ts, pos = session.gaze.timestamps, session.gaze.positions
    ecc = cfg.target_eccentricity_cm
    for t0, d, role in zip(truth.onsets, truth.directions, truth.roles):
        target = ecc * np.array(DIRECTION_VECTORS[d])
        # a back saccade starts at the initial target, opposite its own direction
        start = np.zeros(2) if role == Role.INITIAL else -target
        win = (ts >= t0) & (ts <= t0 + 0.04)
        dist = np.linalg.norm(pos[win] - start, axis=1)
        assert dist.max() > 0.5 * ecc, (t0, d, role)


def test_template_timing():
    t = np.arange(-0.1, 0.3, 1e-4)
    y = saccade_template(t)
    assert abs(t[np.argmax(y)] - 0.05) < 1e-3
    assert np.all(y[t <= -0.05] == 0) and np.all(y[t >= 0.2] == 0)


def test_duration_too_short_names_minimum():
    with pytest.raises(ValueError, match="required"):
        generate_session(short_config(duration_s=5.0))


def test_invalid_config_rejected():
    with pytest.raises(ValueError, match="n_runs"):
        generate_session(short_config(n_runs=2))
    with pytest.raises(ValueError, match="mixing"):
        generate_session(short_config(mixing=((1.0, 0.0),)))


def test_config_round_trip_and_ground_truth_file(tmp_path):
    cfg = short_config(seed=4)
    assert GenConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    _, truth = generate_session(cfg)
    d = json.loads(write_ground_truth(truth, tmp_path / "gt.json").read_text())
    assert d["mixing"]["shape"] == [13, 5]
    np.testing.assert_array_equal(np.reshape(d["mixing"]["data"], (13, 5)), truth.mixing)
