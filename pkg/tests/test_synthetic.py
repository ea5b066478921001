import numpy as np
import pytest
from helpers import rate_report

from shiftkernel import ValidationError
from shiftkernel.synthetic import (
    _rng,
    l2_target_error,
    l2_target_error_stats,
    make_problem,
    polynomial_members,
)


def test_no_shift_means_unit_ratio():
    prob, ds = make_problem(0, 200, 50, shift_strength=0.0)
    np.testing.assert_array_equal(ds.beta, np.ones(200))
    assert prob.b_true == pytest.approx(1.0)


def test_noise_free_outputs_are_exact():
    prob, ds = make_problem(5, 30, 10, noise_sd=0.0)
    np.testing.assert_array_equal(ds.Y, prob.fstar(ds.Xs))


def test_deterministic():
    a = make_problem(11, 40, 20, d=3, p=2)[1]
    b = make_problem(11, 40, 20, d=3, p=2)[1]
    for f in ("Xs", "Y", "Xt", "beta"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = make_problem(12, 40, 20, d=3, p=2)[1]
    assert not np.array_equal(a.Xs, c.Xs)


def test_ratio_is_bounded_and_zero_off_support():
    prob, _ = make_problem(1, 5, 5, shift_strength=1.0)
    X = np.random.default_rng(0).random((1000, 2))
    b = prob.beta_exact(X)
    assert b.min() >= 0 and b.max() <= prob.b_true
    assert prob.beta_exact([[1.5, 0.5], [-0.1, 0.2]]).tolist() == [0.0, 0.0]


def test_noise_is_truncated():
    prob, _ = make_problem(2, 5, 5, p=4, noise_sd=0.5)
    eps = prob.noise(20000, _rng(0, 9))
    assert np.linalg.norm(eps, axis=1).max() <= 3 * 0.5 * 2 + 1e-12


def test_invalid_arguments():
    for kw in ({"n": 0}, {"d": 0}, {"shift_strength": 1.5}, {"noise_sd": -1.0}):
        args = {"seed": 0, "n": 5, "m": 5, **kw}
        with pytest.raises(ValidationError):
            make_problem(**args)


def test_l2_error_of_truth_is_zero():
    prob, _ = make_problem(3, 5, 5)
    assert l2_target_error(prob.fstar, prob, 5000, 0) <= 1e-12


def test_zero_predictor_two_draws_agree():
    prob, _ = make_problem(4, 5, 5)
    zero = lambda X: np.zeros((len(X), prob.p))  # noqa: E731
    _, se1, m1 = l2_target_error_stats(zero, prob, 20000, 0)
    _, se2, m2 = l2_target_error_stats(zero, prob, 20000, 1)
    assert abs(m1 - m2) <= 3 * np.hypot(se1, se2)


def test_doubling_mc_size_is_stable():
    # compared on the mean-square scale, where the standard errors live
    prob, _ = make_problem(6, 5, 5)
    pred = lambda X: 0.5 * prob.fstar(X)  # noqa: E731
    ok = 0
    for r in range(100):
        _, se1, m1 = l2_target_error_stats(pred, prob, 1000, 2 * r)
        _, se2, m2 = l2_target_error_stats(pred, prob, 2000, 2 * r + 1)
        ok += abs(m1 - m2) <= 3 * np.hypot(se1, se2)
    assert ok >= 95


def test_ratio_normalization_and_change_of_measure():
    prob, _ = make_problem(7, 5, 5, shift_strength=0.8)
    r = _rng(0, 10)
    Xp = prob.sample_source(100000, r)
    b = prob.beta_exact(Xp)
    assert abs(b.mean() - 1) <= 3 * b.std(ddof=1) / np.sqrt(len(b))
    loss = lambda X: (X[:, 0] - 0.3) ** 2 + np.sin(4 * X[:, 1])  # noqa: E731
    wl = b * loss(Xp)
    Xq = prob.sample_target(100000, r)
    lq = loss(Xq)
    se = np.hypot(wl.std(ddof=1), lq.std(ddof=1)) / np.sqrt(100000)
    assert abs(wl.mean() - lq.mean()) <= 3 * se


def test_target_moments_match_monte_carlo():
    prob, _ = make_problem(8, 5, 5, shift_strength=0.9)
    x = prob.sample_target(200000, _rng(1, 11))[:, 0]
    for k in range(5):
        v = x**k
        assert abs(v.mean() - prob.target_moment(k)) <= 4 * v.std() / np.sqrt(len(v)) + 1e-15


def test_polynomial_member_gram_is_exact():
    prob, _ = make_problem(9, 5, 5)
    members, G = polynomial_members(prob, 3)
    X = prob.sample_target(200000, _rng(2, 12))
    F = np.stack([m.predict_batch(X) for m in members])
    G_mc = np.einsum("inp,jnp->ij", F, F) / len(X)
    np.testing.assert_allclose(G_mc, G, atol=5e-3)
    assert np.array_equal(G, G.T)


def test_estimator_consistency():
    errors = rate_report().errors
    wins = sum(e[-1] < e[0] for e in errors)
    assert wins >= 9, errors
