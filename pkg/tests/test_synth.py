import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optds.errors import InvalidConfigError
from optds.synth import SynthConfig, generate


def test_dense_has_every_pair():
    lab, _ = generate(SynthConfig(m=7, n=40, seed=0))
    assert lab.num_labels == 7 * 40
    assert (lab.matrix() >= 0).all()


def test_binary_regime_diagonal_mean():
    _, model = generate(SynthConfig(seed=0))
    diag = np.concatenate([model.confusions[:, 0, 0], model.confusions[:, 1, 1]])
    # uniform(0.3, 0.9): mean 0.6, sd 0.6/sqrt(12)
    assert abs(diag.mean() - 0.6) <= 3 * 0.6 / np.sqrt(12) / np.sqrt(diag.size)
    assert diag.min() >= 0.3 and diag.max() <= 0.9


def test_perfect_one_coin_workers_copy_truth():
    lab, model = generate(SynthConfig(m=5, n=50, k=4, regime="one_coin", p_range=(1.0, 1.0), seed=3))
    assert np.array_equal(lab.matrix(), np.tile(model.truth, (5, 1)))


@given(st.integers(0, 2**31 - 1), st.sampled_from([0.2, 0.5, 1.0]))
def test_same_seed_same_data(seed, pi):
    cfg = SynthConfig(m=6, n=30, sparsity=pi, seed=seed)
    a, ma = generate(cfg)
    b, mb = generate(cfg)
    assert np.array_equal(a.matrix(), b.matrix())
    assert np.array_equal(ma.confusions, mb.confusions)
    assert np.array_equal(ma.truth, mb.truth)


def test_sparsity_fraction():
    lab, _ = generate(SynthConfig(m=100, n=1000, sparsity=0.2, seed=4))
    frac = lab.num_labels / 1e5
    assert abs(frac - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / 1e5)


@pytest.mark.slow
def test_label_frequencies_follow_confusions():
    conf = np.array([[[0.7, 0.1, 0.2], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]]])
    lab, model = generate(
        SynthConfig(m=1, n=60000, k=3, regime="explicit", confusions=conf, prior=(0.2, 0.3, 0.5), seed=1)
    )
    assert np.abs(np.bincount(model.truth, minlength=3) / 60000 - [0.2, 0.3, 0.5]).max() < 0.01
    for l in range(3):
        sel = lab.label[model.truth[lab.item] == l]
        assert np.abs(np.bincount(sel, minlength=3) / sel.size - conf[0, :, l]).max() < 0.015


@pytest.mark.parametrize(
    "kw",
    [
        dict(k=1),
        dict(sparsity=0.0),
        dict(sparsity=1.5),
        dict(regime="unknown"),
        dict(k=3),  # binary regime only
        dict(prior=(0.3, 0.3)),
        dict(regime="explicit"),
        dict(diag_range=(0.9, 0.3)),
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(InvalidConfigError):
        generate(SynthConfig(m=3, n=5, **kw))
