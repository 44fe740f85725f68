import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from optds.errors import DegeneratePairError, NoOverlapError, TooFewWorkersError
from optds.model import ObservedLabels
from optds.onecoin import (
    init_accuracies,
    onecoin,
    onecoin_e_step,
    onecoin_log_likelihood,
    onecoin_m_step,
    pairwise_stats,
    population_pairwise_stats,
    run_onecoin_em,
)
from optds.pipeline import prediction_error
from optds.synth import SynthConfig, generate


def test_full_agreement_statistic():
    lab = ObservedLabels.from_matrix(np.array([[0, 1, 1, 0], [0, 1, 1, 0]]), 2)
    assert pairwise_stats(lab).stats[0, 1] == pytest.approx(0.25)


def test_full_disagreement_statistic():
    lab = ObservedLabels.from_matrix(np.array([[0, 1, 1, 0], [1, 0, 0, 1]]), 2)
    assert pairwise_stats(lab).stats[0, 1] == pytest.approx(-0.25)


def test_statistic_uses_common_items_only():
    mat = np.array([[0, 1, -1, 0], [0, 0, 1, -1]])
    st_ = pairwise_stats(ObservedLabels.from_matrix(mat, 2))
    # common items 0 and 1, agreement 1/2
    assert st_.overlap[0, 1] == 2
    assert st_.stats[0, 1] == pytest.approx(0.5 * (0.5 - 0.5))


def test_no_overlap():
    mat = np.array([[0, -1], [-1, 1], [0, 1]])
    lab = ObservedLabels.from_matrix(mat, 2)
    with pytest.raises(NoOverlapError):
        pairwise_stats(lab)
    assert pairwise_stats(lab, allow_missing=True).stats[0, 1] == 0.0


@pytest.mark.slow
def test_statistic_expectation_monte_carlo():
    pa, pb, k, n = 0.8, 0.65, 3, 100_000
    rng = np.random.default_rng(0)
    truth = rng.integers(0, k, size=n)

    def draw(p):
        wrong = (truth + rng.integers(1, k, size=n)) % k
        return np.where(rng.random(n) < p, truth, wrong)

    lab = ObservedLabels.from_matrix(np.stack([draw(pa), draw(pb)]), k)
    got = pairwise_stats(lab).stats[0, 1]
    expect = (pa - 1 / k) * (pb - 1 / k)
    # N is an affine map of an agreement rate with slope (k-1)/k
    agree = pa * pb + (1 - pa) * (1 - pb) / (k - 1)
    sd = (k - 1) / k * np.sqrt(agree * (1 - agree) / n)
    assert abs(got - expect) <= 3 * sd


def test_population_init_three_workers():
    stats = population_pairwise_stats([0.9, 0.8, 0.7], 2)
    init = init_accuracies(stats, 2)
    assert tuple(init.partners[0]) == (1, 2)
    # 0.5 + sqrt(0.12 * 0.08 / 0.06)
    np.testing.assert_allclose(init.accuracies, [0.9, 0.8, 0.7], atol=1e-12)


@st.composite
def informative_population(draw):
    k = draw(st.sampled_from([2, 3, 4]))
    m = draw(st.integers(3, 12))
    mag = np.array(draw(st.lists(st.floats(0.05, 1 / k - 0.01), min_size=m, max_size=m)))
    sign = np.array(draw(st.lists(st.sampled_from([1, 1, 1, -1]), min_size=m, max_size=m)))
    beta = sign * mag
    assume(beta.mean() > 0.01)
    return 1 / k + beta, k


@given(informative_population(), st.sampled_from(["shared", "per_worker"]))
def test_population_init_recovers_informative_workers(pop, reference):
    p, k = pop
    # signs relative to each worker's own partner only agree when no one is adversarial
    assume(reference == "shared" or (p > 1 / k).all())
    init = init_accuracies(population_pairwise_stats(p, k), k, reference)
    np.testing.assert_allclose(init.accuracies, p, atol=1e-9)


def test_uninformative_workers_degenerate():
    with pytest.raises(DegeneratePairError):
        init_accuracies(population_pairwise_stats([0.5, 0.5, 0.5, 0.5], 2), 2)


def test_too_few_workers():
    with pytest.raises(TooFewWorkersError):
        init_accuracies(population_pairwise_stats([0.9, 0.8], 2), 2)


def test_mirrored_population_mean_above_chance():
    p = np.array([0.9, 0.8, 0.7, 0.85])
    mirrored = 2 / 2 - p  # 2/k - p with k = 2
    for q in (p, mirrored):
        init = init_accuracies(population_pairwise_stats(q, 2), 2)
        assert init.accuracies.mean() >= 0.5
        np.testing.assert_allclose(init.accuracies, p, atol=1e-12)


def test_flip_when_reference_is_adversarial():
    # worker 0's strongest pair starts with worker 1, whose accuracy is below chance
    p = np.array([0.2, 0.1, 0.9, 0.85, 0.8])
    init = init_accuracies(population_pairwise_stats(p, 2), 2)
    assert init.reference == 1 and init.flipped
    np.testing.assert_allclose(init.accuracies, p, atol=1e-12)


def test_single_worker_bayes():
    lab = ObservedLabels.from_triples(1, 1, 2, [(1, 1, 1)])
    np.testing.assert_allclose(onecoin_e_step(lab, np.array([0.9])).beliefs, [[0.9, 0.1]])


def test_m_step_normalizes_by_own_labels():
    lab = ObservedLabels.from_matrix(np.array([[0, 1, -1, -1], [0, 0, 0, 0]]), 2)
    q = np.eye(2)[[0, 1, 0, 0]]
    p = onecoin_m_step(lab, q)
    np.testing.assert_allclose(p, [1 - 1e-6, 0.75])


def test_perfect_workers_one_round():
    truth = np.array([0, 1, 2, 1, 0, 2])
    lab = ObservedLabels.from_matrix(np.tile(truth, (4, 1)), 3)
    res = run_onecoin_em(lab, np.full(4, 1 - 1e-6), rounds=1)
    assert np.array_equal(res.predictions, truth)


def test_em_likelihood_non_decreasing():
    lab, _ = generate(SynthConfig(m=15, n=300, k=3, regime="one_coin", sparsity=0.4, seed=8))
    res = run_onecoin_em(lab, np.full(15, 0.6), rounds=15)
    assert np.all(np.diff(res.trace) >= -1e-8)
    assert res.trace[-1] == pytest.approx(onecoin_log_likelihood(lab, res.accuracies))


def test_onecoin_end_to_end():
    lab, model = generate(SynthConfig(m=30, n=1000, regime="one_coin", seed=2))
    res = onecoin(lab)
    assert prediction_error(res.predictions, model.truth) < 2.0
    assert np.abs(res.accuracies - model.confusions[:, 0, 0]).max() < 0.1
    c = res.confusions(2)
    np.testing.assert_allclose(c.sum(axis=1), 1.0)
