import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oculodec.core import NeuralSignal
from oculodec.decompose import (
    UnmixingModel, amari_distance, apply_unmixing, fastica_fit, group_ica_fit, ssnr, whiten,
    xdawn_fit_arrays,
)


def _laplace_mix(seed, n_src=3, n_ch=3, seconds=60.0, fs=2000.0):
    r = np.random.default_rng(seed)
    S = r.laplace(size=(int(seconds * fs), n_src))
    A = r.normal(size=(n_ch, n_src))
    return S, A, NeuralSignal(S @ A.T, fs)


def _match_corr(a, b):
    """|corr| between each column of a and its best-matching column of b."""
    c = np.abs(np.corrcoef(a.T, b.T)[:a.shape[1], a.shape[1]:])
    return c.max(axis=1)


def test_white_input_stays_white(rng):
    X = rng.normal(size=(200000, 3))
    _, Z, _ = whiten(X)
    np.testing.assert_allclose(np.cov(Z.T, bias=True), np.eye(3), atol=1e-6)


def test_whitener_of_diagonal_covariance(rng):
    X = rng.normal(size=(100000, 2))
    X -= X.mean(axis=0)
    # exact covariance diag(4, 1)
    L = np.linalg.cholesky(np.cov(X.T, bias=True))
    X = np.linalg.solve(L, X.T).T * [2.0, 1.0]
    W, _, _ = whiten(X)
    # up to row order and sign, W = diag(1/2, 1)
    np.testing.assert_allclose(np.sort(np.abs(W).max(axis=1)), [0.5, 1.0], atol=1e-9)
    np.testing.assert_allclose(np.sort(np.abs(W).min(axis=1)), [0.0, 0.0], atol=1e-9)


def test_rank_deficient_keeps_two(rng):
    X = rng.normal(size=(1000, 2))
    X = np.column_stack([X, X.sum(axis=1)])
    W, Z, _ = whiten(X)
    assert W.shape == (2, 3)
    with pytest.raises(ValueError, match="rank is 2"):
        whiten(X, k=3)


def test_fastica_recovers_laplacian_sources():
    S, A, sig = _laplace_mix(0)
    model = fastica_fit(sig, seed=0)
    assert model.converged
    assert amari_distance(model.matrix @ A) <= 0.05


def test_gaussian_sources_do_not_crash(rng):
    model = fastica_fit(rng.normal(size=(5000, 3)), seed=1, max_iter=20)
    assert model.matrix.shape == (3, 3)
    assert isinstance(model.converged, bool)


def test_fastica_is_deterministic():
    _, _, sig = _laplace_mix(2, seconds=5.0)
    a, b = fastica_fit(sig, seed=3), fastica_fit(sig, seed=3)
    assert np.array_equal(a.matrix, b.matrix)


def test_unit_variance_on_training_data():
    _, _, sig = _laplace_mix(4, seconds=10.0)
    model = fastica_fit(sig, seed=0)
    comps = apply_unmixing(model, sig).components
    np.testing.assert_allclose(comps.var(axis=0), 1.0, atol=1e-3)


def test_group_ica_on_two_copies_matches_single():
    _, _, sig = _laplace_mix(5, seconds=10.0)
    single = fastica_fit(sig, seed=0)
    group = group_ica_fit([sig, sig], seed=0)
    a = apply_unmixing(single, sig).components
    b = apply_unmixing(group, sig).components
    assert _match_corr(a, b).min() >= 0.999


def test_group_ica_on_one_session_is_fastica():
    _, _, sig = _laplace_mix(6, seconds=5.0)
    assert np.array_equal(group_ica_fit([sig], seed=2).matrix, fastica_fit(sig, seed=2).matrix)


def test_group_ica_rejects_permuted_channels():
    _, _, sig = _laplace_mix(7, seconds=2.0)
    perm = sig.pick(list(reversed(sig.channel_ids)))
    with pytest.raises(ValueError, match="same channels"):
        group_ica_fit([sig, perm])


def test_identity_model_and_zero_signal(rng):
    X = rng.normal(size=(100, 4))
    sig = NeuralSignal(X, 100.0)
    np.testing.assert_array_equal(apply_unmixing(UnmixingModel.identity(sig.channel_ids), sig)
                                  .components, X)
    _, _, mixed = _laplace_mix(8, seconds=2.0)
    model = fastica_fit(mixed)
    zero = NeuralSignal(np.zeros((50, 3)), 2000.0, mixed.channel_ids)
    assert not apply_unmixing(model, zero).components.any()


def test_apply_rejects_channel_mismatch():
    _, _, sig = _laplace_mix(9, seconds=2.0)
    model = fastica_fit(sig)
    other = NeuralSignal(sig.data, sig.fs, ("a", "b", "c"))
    with pytest.raises(ValueError, match="channel mismatch"):
        apply_unmixing(model, other)


def test_noiseless_sources_recovered():
    S, A, sig = _laplace_mix(10, n_src=4, n_ch=6, seconds=20.0)
    comps = apply_unmixing(fastica_fit(sig, k=4, seed=0), sig).components
    assert _match_corr(S, comps).min() >= 0.999


def test_model_json_round_trip(tmp_path):
    _, _, sig = _laplace_mix(11, seconds=2.0)
    model = fastica_fit(sig)
    back = UnmixingModel.load(model.save(tmp_path / "m.json"))
    assert np.array_equal(back.matrix, model.matrix)
    assert back.channel_ids == model.channel_ids


def test_amari_anchor():
    A = np.random.default_rng(0).normal(size=(5, 5))
    assert amari_distance(np.linalg.inv(A) @ A) < 1e-12
    P = np.eye(4)[[2, 0, 3, 1]] * [1.0, -3.0, 2.0, 0.5]
    assert amari_distance(P) == 0.0
    assert amari_distance(np.ones((3, 3))) == 1.0


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(-100, 100).filter(lambda s: abs(s) > 1e-3))
def test_application_is_scale_equivariant(scale):
    _, _, sig = _laplace_mix(12, seconds=1.0)
    model = fastica_fit(sig)
    np.testing.assert_allclose(apply_unmixing(model, scale * sig.data).components,
                               scale * apply_unmixing(model, sig.data).components,
                               rtol=1e-12, atol=1e-9)


def _erp_epochs(rng, n_targets=60, n_other=60, n_samp=64, n_ch=2, amp=1.0, mix=None):
    t = np.arange(n_samp) / n_samp
    erp = amp * np.sin(2 * np.pi * 3 * t)
    X = rng.normal(size=(n_targets + n_other, n_samp, n_ch))
    if mix is not None:
        X = X @ mix.T
    is_target = np.r_[np.ones(n_targets, bool), np.zeros(n_other, bool)]
    return X, is_target, erp


def test_xdawn_finds_erp_channel(rng):
    X, is_target, erp = _erp_epochs(rng)
    X[:, :, 0] = 0.0
    X[is_target, :, 0] = erp
    X[~is_target, :, 0] = rng.normal(0, 0.01, size=(int((~is_target).sum()), 64))
    model = xdawn_fit_arrays(X, is_target, n_components=1)
    assert abs(model.unmixing[0] @ np.array([1.0, 0.0])) >= 0.99


def test_xdawn_full_rank(rng):
    X, is_target, _ = _erp_epochs(rng, n_ch=4)
    model = xdawn_fit_arrays(X, is_target, n_components=4)
    assert np.linalg.matrix_rank(model.unmixing) == 4


def test_xdawn_null_gain_is_small(rng):
    X, is_target, _ = _erp_epochs(rng, n_targets=200, n_other=200, n_ch=4)
    model = xdawn_fit_arrays(X, is_target, n_components=1)
    Y = X[is_target] @ model.unmixing.T
    assert ssnr(Y)[0] <= 1.5 * ssnr(X[is_target]).max()


def test_xdawn_singular_covariance_warns(rng):
    X, is_target, _ = _erp_epochs(rng, n_ch=2)
    X = np.concatenate([X, X[:, :, :1]], axis=2)
    with pytest.warns(RuntimeWarning, match="ridge"):
        xdawn_fit_arrays(X, is_target, n_components=2)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), amp=st.floats(0.2, 3.0))
def test_xdawn_top_component_beats_every_channel(seed, amp):
    r = np.random.default_rng(seed)
    mix = r.normal(size=(5, 5))
    X, is_target, erp = _erp_epochs(r, n_ch=5, mix=mix)
    X[is_target] += np.outer(erp, mix[:, 0])
    model = xdawn_fit_arrays(X, is_target, n_components=1)
    Y = X[is_target] @ model.unmixing.T
    assert ssnr(Y)[0] >= ssnr(X[is_target]).max() - 1e-12
