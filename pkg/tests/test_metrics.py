import math

import numpy as np
import pytest

from shiftkernel import ValidationError
from shiftkernel.metrics import (
    effective_dimension,
    format_table,
    mse,
    psnr,
    rate_slope,
    rel_err,
    report,
    table_csv,
)


def test_mse_examples():
    t = np.random.default_rng(0).random((4, 5))
    assert mse(t, t) == 0.0
    assert mse(np.clip(t, 0, 0.85) + 0.1, np.clip(t, 0, 0.85)) == pytest.approx(0.01)
    assert mse([0.0, 1.0], [1.0, 1.0]) == 0.5


def test_mse_permutation_invariant(rng):
    p, t = rng.random((6, 3)), rng.random((6, 3))
    perm = rng.permutation(6)
    assert mse(p[perm], t[perm]) == pytest.approx(mse(p, t), rel=1e-15)


def test_rel_err_examples():
    t = np.array([[0.2, 0.4], [0.9, 0.1]])
    assert rel_err(t, t) == 0.0
    assert rel_err(2 * t, t) == pytest.approx(1.0)
    assert rel_err([[1.0, 0.0]], [[0.0, 1.0]]) == pytest.approx(math.sqrt(2))


def test_rel_err_is_per_item_mean():
    pred = np.array([[1.0, 0.0], [0.0, 0.0]])
    truth = np.array([[2.0, 0.0], [0.0, 10.0]])
    assert rel_err(pred, truth) == pytest.approx((0.5 + 1.0) / 2)


def test_errors():
    with pytest.raises(ValidationError):
        mse(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        rel_err([[1.0, 1.0]], [[0.0, 0.0]])
    with pytest.raises(ValidationError, match="infinite PSNR"):
        psnr(0.0)
    with pytest.raises(ValidationError):
        psnr(-1.0)


def test_psnr_values():
    assert psnr(1.0) == 0.0
    assert psnr(0.0081) == pytest.approx(20.92, abs=0.005)
    assert psnr(0.006956) == pytest.approx(21.58, abs=0.005)
    assert psnr(0.01, peak=255) == pytest.approx(10 * math.log10(255**2 / 0.01))


def test_report_consistency(rng):
    t = rng.random((5, 16))
    p = np.clip(t + rng.normal(0, 0.05, t.shape), 0, 1)
    r = report(p, t)
    assert r.n_items == 5
    assert r.psnr == pytest.approx(-10 * math.log10(r.mse), rel=1e-14)
    assert report(t, t).psnr == math.inf


def test_effective_dimension_examples():
    n = 6
    assert effective_dimension(n * np.eye(n), 1.0) == pytest.approx(n / 2)
    K = 2 * np.diag([1.0, 0.1])
    assert effective_dimension(K, 0.1) == pytest.approx(1 / 1.1 + 0.5, rel=1e-14)
    assert effective_dimension(n * np.eye(n), 1e6) <= n / 1e6


def test_effective_dimension_monotone(rng):
    A = rng.normal(size=(20, 5))
    K = A @ A.T
    vals = [effective_dimension(K, lam) for lam in np.geomspace(1e-6, 1e3, 40)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert 0 <= vals[-1] <= vals[0] <= 20


def test_rate_slope_examples():
    ns = [100, 400, 1600]
    assert rate_slope(ns, [n ** -0.5 for n in ns]) == pytest.approx(-0.5, abs=1e-10)
    assert rate_slope(ns, [0.3, 0.3, 0.3]) == pytest.approx(0.0, abs=1e-14)
    assert rate_slope(ns, [1.0, 0.4, 0.2]) == pytest.approx(-0.5805, abs=1e-3)
    with pytest.raises(ValidationError):
        rate_slope([1, 2], [1.0, 0.5])
    with pytest.raises(ValidationError):
        rate_slope([3, 2, 1], [1.0, 0.5, 0.2])


def test_tables():
    r = report(np.full((1, 4), 0.5), np.full((1, 4), 0.6))
    text = format_table([("1e-03", r), ("Agg.", r)])
    head, row1, row2 = text.strip().splitlines()
    assert head.split() == ["Lambda", "MSE", "Rel.", "Err.", "PSNR"]
    assert row2.startswith("Agg.")
    assert len(row1) == len(head)
    assert table_csv([("Agg.", r)]).splitlines()[0] == "lambda,mse,rel_err,psnr"
