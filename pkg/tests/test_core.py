import numpy as np
import pytest
from dataclasses import replace

from oculodec.core import (
    DIRECTIONS, Direction, Epoch, Klass, NeuralSignal, Role, TrialLabel, complement,
    validate_session,
)


def test_synthetic_session_is_valid(short_session):
    session, _ = short_session
    assert validate_session(session) == []


def test_zero_sampling_rate_reported(short_session):
    session, _ = short_session
    bad = replace(session, neural=NeuralSignal(session.neural.data[:10], 0.0,
                                               session.neural.channel_ids))
    assert "neural.fs must be > 0" in validate_session(bad)


def test_overlapping_runs_reported(short_session):
    session, _ = short_session
    bad = replace(session, runs=((0.0, 10.0), (5.0, 15.0)))
    assert "runs overlap" in validate_session(bad)


def test_validation_is_pure(short_session):
    session, _ = short_session
    bad = replace(session, runs=((0.0, 10.0), (5.0, 15.0)))
    assert validate_session(bad) == validate_session(bad)


def test_fixation_label_rejects_direction():
    with pytest.raises(ValueError):
        TrialLabel(Klass.FIXATION, Direction.UP)
    with pytest.raises(ValueError):
        TrialLabel(Klass.FIXATION, role=Role.BACK)


@pytest.mark.parametrize("d", DIRECTIONS)
def test_complement_is_an_involution(d):
    assert complement(complement(d)) == d
    assert complement(d) != d


def test_complement_pairs():
    assert complement("up") == Direction.DOWN
    assert complement("left") == Direction.RIGHT


def test_epoch_invariants():
    lab = TrialLabel(Klass.SACCADE, "up", "initial")
    ep = Epoch(np.zeros((64, 2)), 0.5, 64.0, lab)
    assert ep.duration == 1.0
    assert ep.times()[0] == -0.5
    with pytest.raises(ValueError):
        Epoch(np.zeros((64, 2)), 1.5, 64.0, lab)
    with pytest.raises(ValueError):
        Epoch(np.full((4, 1), np.nan), 0.0, 64.0, lab)


def test_signals_are_immutable():
    sig = NeuralSignal(np.ones((5, 2)), 100.0)
    with pytest.raises(ValueError):
        sig.data[0, 0] = 3.0
    assert sig.channel_ids == ("ch0", "ch1")
    assert sig.drop(["ch0"]).channel_ids == ("ch1",)
