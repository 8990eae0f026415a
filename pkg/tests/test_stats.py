import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_ks
from wlanbw.probe_queue import Deterministic, Exponential
from wlanbw.stats import (
    EmpiricalDist,
    ks_critical,
    ks_permutation_threshold,
    ks_two_sample,
    per_index_distribution,
    queue_settling_index,
    settling_index,
    stationary_reference,
    transitory_report,
)


def test_step_cdf_is_right_continuous():
    d = EmpiricalDist([1.0, 2.0, 2.0, 4.0])
    assert d.cdf([0.5, 1.0, 2.0, 3.0, 4.0]).tolist() == [0.0, 0.25, 0.75, 0.75, 1.0]


def test_interpolated_cdf_agrees_at_samples():
    d = EmpiricalDist([1.0, 2.0, 2.0, 4.0])
    assert d.interpolated_cdf([1.0, 2.0, 4.0]).tolist() == d.cdf([1.0, 2.0, 4.0]).tolist()
    assert d.interpolated_cdf(3.0) == pytest.approx(0.875)
    assert d.interpolated_cdf(0.0) == 0.0 and d.interpolated_cdf(9.0) == 1.0


def test_empty_distribution_rejected():
    with pytest.raises(ValueError):
        EmpiricalDist([])


# -- per-index views ----------------------------------------------------------


def test_per_index_distribution_collects_one_column():
    mat = np.array([[2000.0, 1.0], [3000.0, 1.0], [4000.0, 1.0]])
    assert per_index_distribution(mat, 1).samples.tolist() == [2000.0, 3000.0, 4000.0]
    with pytest.raises(IndexError):
        per_index_distribution(mat, 3)
    with pytest.raises(IndexError):
        per_index_distribution(mat, 0)


def test_stationary_reference_pools_tail():
    mat = np.arange(1, 1001, dtype=float)[None, :].repeat(2, axis=0)
    ref = stationary_reference(mat, 500)
    assert ref.n == 1000 and ref.samples.min() == 501.0
    np.testing.assert_array_equal(stationary_reference(mat, 1).samples, per_index_distribution(mat, 1000).samples)
    with pytest.raises(ValueError):
        stationary_reference(mat, 1001)


def test_stationary_reference_point_mass():
    mat = np.full((4, 10), 2500.0)
    ref = stationary_reference(mat, 5)
    assert ref.cdf(2499.0) == 0.0 and ref.cdf(2500.0) == 1.0


# -- KS -------------------------------------------------------------------------


def test_ks_examples():
    a = EmpiricalDist([1.0, 2.0, 3.0, 4.0])
    assert ks_two_sample(a, a) == 0.0
    assert ks_two_sample(EmpiricalDist([1.0] * 3), EmpiricalDist([9.0] * 3)) == 1.0
    assert ks_two_sample(a, EmpiricalDist([1.5, 2.5, 3.5, 4.5])) == 0.25


def test_ks_critical_values():
    assert ks_critical(0.05, 1000, 1000) == pytest.approx(1.358 * math.sqrt(2 / 1000))
    assert ks_critical(0.05, 1000, 1000) == pytest.approx(0.0607, abs=1e-4)
    assert ks_critical(0.01, 100, 100) > ks_critical(0.05, 100, 100) > ks_critical(0.10, 100, 100)
    assert ks_critical(0.05, 10**9, 10**9) < 1e-4
    with pytest.raises(ValueError):
        ks_critical(0.2, 10, 10)
    with pytest.raises(ValueError):
        ks_critical(0.05, 0, 10)


samples = st.lists(st.integers(0, 30).map(float), min_size=1, max_size=25)


@settings(max_examples=300, deadline=None)
@given(a=samples, b=samples)
def test_ks_matches_naive_oracle(a, b):
    da, db = EmpiricalDist(a), EmpiricalDist(b)
    d = ks_two_sample(da, db)
    assert d == naive_ks(a, b)
    assert d == ks_two_sample(db, da)
    assert 0.0 <= d <= 1.0


@settings(max_examples=100, deadline=None)
@given(a=samples, b=samples)
def test_interpolated_ks_in_unit_interval(a, b):
    assert 0.0 <= ks_two_sample(EmpiricalDist(a), EmpiricalDist(b), interpolate=True) <= 1.0


def test_permutation_threshold_near_asymptotic():
    rng = np.random.default_rng(0)
    a, b = EmpiricalDist(rng.random(200)), EmpiricalDist(rng.random(200))
    thr = ks_permutation_threshold(a, b, permutations=400, seed=1)
    assert thr == pytest.approx(ks_critical(0.05, 200, 200), rel=0.2)


def test_null_rejection_rate_small_run():
    rng = np.random.default_rng(3)
    thr = ks_critical(0.05, 500, 500)
    hits = sum(ks_two_sample(EmpiricalDist(rng.normal(size=500)), EmpiricalDist(rng.normal(size=500))) > thr
               for _ in range(400))
    assert 0.02 <= hits / 400 <= 0.08


# -- settling ------------------------------------------------------------------


def test_settling_index_strict_and_tolerant():
    ok = np.array([0, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1], dtype=bool)
    assert settling_index(ok, window=3) == 6
    assert settling_index(ok, window=3, tolerance=1) == 3
    assert settling_index(np.zeros(5, bool), window=2) is None
    with pytest.raises(ValueError):
        settling_index(ok, 0)


def test_queue_settling_index():
    series = np.concatenate([np.linspace(0, 1, 11), np.ones(60)])
    assert queue_settling_index(series, window=5, tolerance=0) == 10


def test_transitory_report_iid_exponential_has_no_transitory():
    mat = Exponential(2000.0).draw_ns(np.random.default_rng(5), 1000, 120) / 1000.0
    rep = transitory_report(mat, tail=50)
    assert rep.n0 == 1 and rep.reached
    assert rep.threshold == pytest.approx(ks_critical(0.05, 1000, 50_000))
    assert (rep.per_index_d >= 0).all() and (rep.per_index_d <= 1).all()


def test_transitory_report_detects_shifted_start():
    rng = np.random.default_rng(6)
    mat = Exponential(2000.0).draw_ns(rng, 1000, 100) / 1000.0
    mat[:, :15] *= 0.6
    rep = transitory_report(mat, tail=50)
    assert (rep.per_index_d[:15] > rep.threshold).all()
    # null-level exceedances after the shift may push n0 back by under one window
    assert 16 <= rep.n0 < 16 + rep.window


def test_transitory_report_on_contended_dcf(contended_ensemble):
    rep = transitory_report(contended_ensemble, tail=30)
    assert rep.mean_mu_us[0] < rep.mean_mu_us[-30:].mean()
    assert rep.per_index_d[0] > rep.threshold
    assert rep.mean_queue.shape == (80,) and (rep.mean_queue >= 0).all()


def test_transitory_report_deterministic_point_mass():
    mat = Deterministic(1000.0).draw_ns(np.random.default_rng(0), 10, 20) / 1000.0
    rep = transitory_report(mat, tail=5)
    assert rep.n0 == 1 and (rep.per_index_d == 0).all()
