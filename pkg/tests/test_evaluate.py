import json
from collections import Counter
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oculodec.classify import ClassifierSpec
from oculodec.core import Klass
from oculodec.epoching import detect_saccade_onsets
from oculodec.evaluate import (
    COMPARISONS, INTERVALS, ROLES, EvalReport, PipelineConfig, auc_roc, build_dataset,
    calibrate_onset_amplitude, format_wait_summary, make_loro, oracle_onset_auc,
    prepare_session, run_protocol, wait_time_stats,
)
from oculodec.synthgen import GenConfig, generate_session

SMALL = dict(fs_neural=256.0, n_runs=3, n_trials_per_direction=12, fixation_block_s=10.0)
FAST = PipelineConfig(classifier=ClassifierSpec(n_estimators=10, seed=0))


@pytest.fixture(scope="module")
def pair():
    first, truth = generate_session(GenConfig(seed=21, session_id="S1", **SMALL))
    mixing = tuple(map(tuple, truth.mixing))
    second, _ = generate_session(GenConfig(seed=22, session_id="S2", mixing=mixing, **SMALL))
    return [prepare_session(first, FAST), prepare_session(second, FAST)]


def _brute_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_loro_examples():
    runs = np.repeat([0, 1, 2], [10, 12, 8])
    plan = make_loro(runs)
    assert len(plan) == 3
    splits = plan.splits(runs)
    assert [te.size for _, te in splits] == [10, 12, 8]
    for tr, te in splits:
        assert not set(runs[tr]) & set(runs[te])
        assert tr.size + te.size == runs.size
    with pytest.raises(ValueError, match="within a run"):
        make_loro([4, 4, 4])


def test_auc_examples():
    assert auc_roc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc_roc([0.9, 0.2, 0.8, 0.3], [1, 0, 0, 1]) == 0.75
    assert auc_roc([0.4] * 6, [0, 1] * 3) == 0.5
    with pytest.raises(ValueError):
        auc_roc([0.1, 0.2], [1, 1])


def test_multiclass_auc_is_macro_one_vs_rest(rng):
    y = np.repeat(["a", "b", "c"], 5)
    P = rng.random((15, 3))
    expect = np.mean([_brute_auc(P[:, k], (y == c).astype(int)) for k, c in enumerate("abc")])
    assert auc_roc(P, y) == pytest.approx(expect, abs=1e-15)
    with pytest.raises(ValueError, match="absent"):
        auc_roc(P[:10], y[:10], classes=["a", "b", "c"])


@settings(max_examples=60, deadline=None)
@given(scores=st.lists(st.integers(0, 6), min_size=2, max_size=25), seed=st.integers(0, 999))
def test_auc_matches_pairwise_count(scores, seed):
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    labels[0], labels[1] = 0, 1
    assert auc_roc(scores, labels) == _brute_auc(scores, labels)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_auc_invariant_to_increasing_maps(seed):
    r = np.random.default_rng(seed)
    s = np.round(r.normal(size=30), 1)
    y = np.r_[0, 1, r.integers(0, 2, 28)]
    for g in (np.exp, lambda v: 3 * v + 7, lambda v: v ** 3, np.arctan):
        assert auc_roc(g(s), y) == auc_roc(s, y)


def test_wait_stats_examples(tmp_path):
    ws = wait_time_stats([0.5, 0.7])
    assert (ws.mean, ws.min, ws.max, ws.n) == (pytest.approx(0.6), 0.5, 0.7, 2)
    assert format_wait_summary(0.626, 0.414, 0.935) == "626 ms (414–935)"
    lines = ws.write_histogram(tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin_start_s,bin_end_s,count"
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 2
    with pytest.raises(ValueError):
        wait_time_stats([])


def test_generator_waits_recovered_from_gaze():
    cfg = GenConfig(seed=31, fs_neural=128.0, task="visually_guided", n_trials_per_direction=50,
                    fixation_block_s=5.0)
    session, truth = generate_session(cfg)
    cues = [m.time for m in session.markers_of("cue_onset")]
    events = detect_saccade_onsets(session.gaze, cues=cues, runs=session.runs)
    ws = wait_time_stats(events)
    assert ws.n == truth.wait_times.size >= 200
    assert 0.60 <= ws.mean <= 0.65
    assert abs(ws.mean - truth.wait_times.mean()) <= 1 / 60


def test_fixation_epochs_match_saccades_per_run(pair):
    for role in ROLES:
        ds = build_dataset(pair[0], role, "pre+post")
        for r in np.unique(ds.run):
            sel = ds.run == r
            assert (ds.klass[sel] == 1).sum() == (ds.klass[sel] == 0).sum()


def test_fixation_epochs_stay_in_their_run(pair):
    prep = pair[0]
    ds = build_dataset(prep, "combined", "pre")
    # every fixation interval lies inside the run it is tagged with
    for s, e, r in prep.fixations:
        rs, re_ = prep.runs[r]
        assert rs <= s and e <= re_


def test_report_structure_and_fold_means(pair, tmp_path):
    report = run_protocol(pair, FAST, "both")
    groups = Counter((r.protocol, r.role, r.comparison, r.interval) for r in report.rows)
    assert len(groups) == 2 * 3 * 8 * 3
    assert set(groups.values()) == {2}
    assert set(COMPARISONS) == {"onset", "4class"} | {f"{a}-{b}" for a, b in
                                                     combinations(("left", "right", "up", "down"), 2)}
    for r in report.rows:
        assert 0.0 <= r.mean_auc <= 1.0
        if r.protocol == "within":
            assert r.mean_auc == float(np.mean(r.fold_aucs))
            assert len(r.fold_aucs) == 3
    jp, cp = report.write(tmp_path)
    back = EvalReport.from_json(json.loads(jp.read_text()))
    assert back.to_csv() == cp.read_text()
    assert cp.read_text().splitlines()[0].startswith("task,protocol,session,role")


def test_cross_rows_name_the_test_session(pair):
    cfg = replace(FAST, roles=("initial",), intervals=("pre+post",), comparisons=("onset",))
    report = run_protocol(pair, cfg, "cross")
    assert sorted(r.session for r in report.rows) == ["S1", "S2"]
    with pytest.raises(ValueError, match="2 sessions"):
        run_protocol(pair[:1], cfg, "cross")


def test_config_round_trip():
    cfg = replace(FAST, grid=(ClassifierSpec(n_estimators=5),), exclude_channels=("ch03",))
    assert PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({"bogus": 1})


def test_oracle_grows_with_amplitude():
    gen = GenConfig(seed=41, **SMALL)
    cfg = replace(FAST, onset_source="markers")
    aucs = [oracle_onset_auc(gen, a, cfg) for a in (0.0, 1.0, 4.0)]
    assert aucs[0] < aucs[1] < aucs[2]
    cal = calibrate_onset_amplitude(gen, 0.9, cfg)
    assert cal.oracle_auc >= 0.9 and abs(cal.oracle_auc - 0.9) < 0.02
    assert all(i in INTERVALS for i in (cal.interval,))


def test_dataset_classes(pair):
    ds = build_dataset(pair[1], "initial", "post")
    assert set(ds.direction[ds.klass == 1]) == {"left", "right", "up", "down"}
    assert set(ds.direction[ds.klass == 0]) == {""}
    assert ds.X.shape[1] == 32 and ds.fs == 64.0
    assert Klass.SACCADE.value
