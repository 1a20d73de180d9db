"""Metric-suite contracts against independent brute-force oracles."""

import math

import numpy as np
import pytest

from dockscore.errors import DataError, ShapeError
from dockscore.metrics import (
    EvalReport,
    PredictionSet,
    aurtc,
    evaluate_all,
    log_grid,
    pearson,
    r_squared,
    recall_zeta_sigma,
    res_score,
    rtc_curve,
)
from dockscore.metrics import _log_trapezoid_mean
from dockscore.numeric import SeededRng
from dockscore.train.objectives import f1_at_fraction


# --- independent oracles (sort-and-intersect, shared tie rule) -----------------

def oracle_count(fraction, n):
    return max(1, math.ceil(fraction * n - 1e-9))


def oracle_bottom(values, count):
    return set(sorted(range(len(values)), key=lambda i: (values[i], i))[:count])


def oracle_recall(y, z, zeta, sigma):
    n = len(y)
    t = oracle_bottom(y, oracle_count(sigma, n))
    p = oracle_bottom(z, oracle_count(zeta, n))
    return len(t & p) / len(t)


def oracle_f1(y, z, fraction):
    n = len(y)
    m = oracle_count(fraction, n)
    t = oracle_bottom(y, m)
    p = oracle_bottom(z, m)
    inter = len(t & p)
    if inter == 0:
        return 0.0
    prec, rec = inter / m, inter / m
    return 2 * prec * rec / (prec + rec)


def random_instance(seed, n):
    rng = SeededRng(seed)
    y = rng.child("y").normal(size=n) * 2.0 - 7.0
    z = 0.6 * y + rng.child("z").normal(size=n)
    return PredictionSet(y=y, z=z)


# --- parametrized recall --------------------------------------------------------

def test_recall_perfect_containment():
    y = np.arange(100, dtype=float)
    p = PredictionSet(y=y, z=y.copy())
    assert recall_zeta_sigma(p, 0.1, 0.01) == 1.0
    assert recall_zeta_sigma(p, 0.1, 0.1) == 1.0


def test_recall_antipredictor_zero():
    rng = SeededRng(1)
    y = np.sort(rng.normal(size=1000))
    p = PredictionSet(y=y, z=-y)
    assert recall_zeta_sigma(p, 0.1, 0.01) == 0.0


def test_recall_matches_oracle_on_random_instances():
    for seed in range(10):
        p = random_instance(seed, 200)
        for zeta, sigma in [(0.1, 0.01), (0.05, 0.05), (0.5, 0.02), (1.0, 1.0)]:
            assert recall_zeta_sigma(p, zeta, sigma) == oracle_recall(
                p.y, p.z, zeta, sigma)


def test_recall_tie_rule_matches_oracle():
    y = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0])
    z = np.array([2.0, 1.0, 1.0, 1.0, 3.0, 3.0, 2.0, 4.0, 4.0, 5.0])
    p = PredictionSet(y=y, z=z)
    for zeta, sigma in [(0.2, 0.2), (0.3, 0.1), (0.5, 0.4)]:
        assert recall_zeta_sigma(p, zeta, sigma) == oracle_recall(y, z, zeta, sigma)


def test_recall_monotone_in_zeta():
    p = random_instance(42, 300)
    values = [recall_zeta_sigma(p, zeta, 0.05)
              for zeta in np.linspace(0.01, 1.0, 25)]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


def test_expected_recall_of_random_ranking():
    # E[recall] = ceil(zeta*N)/N for a uniformly random ranking
    rng = SeededRng(7)
    n, zeta, sigma = 120, 0.1, 0.05
    y = np.sort(rng.child("y").normal(size=n))
    samples = []
    for i in range(1000):
        z = rng.child("perm", i).permutation(n).astype(float)
        samples.append(recall_zeta_sigma(PredictionSet(y=y, z=z), zeta, sigma))
    samples = np.array(samples)
    expected = oracle_count(zeta, n) / n
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - expected) < 3 * se


# --- curves and areas -------------------------------------------------------------

def test_rtc_curve_perfect_is_all_ones_relative():
    y = np.arange(500, dtype=float)
    p = PredictionSet(y=y, z=y.copy())
    assert aurtc(p, 0.01) == pytest.approx(1.0, abs=1e-12)


def test_rtc_grid_covers_three_decades():
    grid = log_grid(1000)
    assert len(grid) == 64
    assert grid[0] == pytest.approx(1e-3)
    assert grid[-1] == pytest.approx(1.0)


def test_rtc_curve_antipredictor_low_sigmas_are_zero():
    rng = SeededRng(3)
    y = np.sort(rng.normal(size=1000))
    p = PredictionSet(y=y, z=-y)
    for sigma, recall in rtc_curve(p, 0.01):
        if sigma <= 1 - 0.01 - 1e-9:
            assert recall == 0.0


def test_log_trapezoid_of_constant_curve():
    grid = log_grid(1000)
    for c in (0.25, 0.7, 1.0):
        assert _log_trapezoid_mean(np.full(len(grid), c), grid) == pytest.approx(
            c, abs=1e-12)


def test_aurtc_matches_high_resolution_reference():
    for seed in range(5):
        p = random_instance(seed, 300)
        coarse = aurtc(p, 0.01)
        fine = aurtc(p, 0.01, grid=log_grid(300, points=4096))
        assert abs(coarse - fine) < 0.01


def test_aurtc_bounds():
    for seed in range(5):
        p = random_instance(seed, 250)
        for zeta in (0.01, 0.001):
            assert 0.0 <= aurtc(p, zeta) <= 1.0


# --- enrichment surface -----------------------------------------------------------

def test_res_perfect_is_one():
    y = np.arange(400, dtype=float)
    assert res_score(PredictionSet(y=y, z=y.copy())) == pytest.approx(1.0, abs=1e-9)


def test_res_antipredictor_is_small():
    rng = SeededRng(5)
    y = np.sort(rng.normal(size=1000))
    assert res_score(PredictionSet(y=y, z=-y)) < 0.15


def test_res_stable_under_grid_refinement():
    for seed in range(4):
        p = random_instance(seed, 300)
        coarse = res_score(p)
        fine = res_score(p, grid_zeta=log_grid(300, 128), grid_sigma=log_grid(300, 128))
        assert abs(coarse - fine) < 0.01


def test_res_surface_matches_pointwise_oracle():
    p = random_instance(11, 120)
    gz = log_grid(120, 8)
    gs = log_grid(120, 8)
    from dockscore.metrics import res_surface
    surf = res_surface(p, gz, gs)
    for i, zeta in enumerate(gz):
        for j, sigma in enumerate(gs):
            assert surf[i, j] == oracle_recall(p.y, p.z, zeta, sigma)


# --- correlations ------------------------------------------------------------------

def test_pearson_and_r2_perfect():
    p = random_instance(0, 50)
    exact = PredictionSet(y=p.y, z=p.y.copy())
    assert pearson(exact) == pytest.approx(1.0, abs=1e-12)
    assert r_squared(exact) == pytest.approx(1.0, abs=1e-12)


def test_pearson_sign_flip():
    y = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    assert pearson(PredictionSet(y=y, z=-y)) == pytest.approx(-1.0, abs=1e-12)


def test_r2_constant_mean_predictor_is_zero():
    p = random_instance(9, 80)
    const = PredictionSet(y=p.y, z=np.full_like(p.y, p.y.mean()))
    assert r_squared(const) == pytest.approx(0.0, abs=1e-12)


def test_r2_can_be_negative_and_matches_formula():
    p = random_instance(10, 60)
    bad = PredictionSet(y=p.y, z=p.y + 10.0)
    expect = 1 - np.sum((bad.y - bad.z) ** 2) / np.sum((bad.y - bad.y.mean()) ** 2)
    assert r_squared(bad) == pytest.approx(expect, abs=1e-12)
    assert r_squared(bad) < 0


def test_zero_variance_errors():
    flat = PredictionSet(y=np.ones(5), z=np.arange(5.0))
    with pytest.raises(DataError):
        pearson(flat)
    with pytest.raises(DataError):
        r_squared(flat)


def test_pearson_matches_numpy_corrcoef():
    for seed in range(5):
        p = random_instance(seed + 100, 150)
        assert pearson(p) == pytest.approx(np.corrcoef(p.y, p.z)[0, 1], abs=1e-12)


# --- rank invariance ----------------------------------------------------------------

def test_rank_invariance_of_set_based_metrics():
    transforms = [
        lambda z: 3.0 * z + 5.0,
        lambda z: np.exp(z / 10.0),
        lambda z: z ** 3 + 0.5 * z,
    ]
    for seed in range(5):
        p = random_instance(seed + 7, 240)
        base = (
            recall_zeta_sigma(p, 0.1, 0.01),
            aurtc(p, 0.01),
            res_score(p),
            f1_at_fraction(p.z, p.y, 0.05),
        )
        for tf in transforms:
            q = PredictionSet(y=p.y, z=tf(p.z))
            after = (
                recall_zeta_sigma(q, 0.1, 0.01),
                aurtc(q, 0.01),
                res_score(q),
                f1_at_fraction(q.z, q.y, 0.05),
            )
            assert base == after  # bit-identical


# --- full report --------------------------------------------------------------------

def test_evaluate_all_perfect_report():
    y = np.linspace(-12.0, -1.0, 300)
    rep = evaluate_all(PredictionSet(y=y, z=y.copy()), hit_fraction=0.01, alpha=1.0)
    assert rep.wmse == 0.0
    for value in (rep.res, rep.aurtc_001, rep.aurtc_0001,
                  rep.recall_01_001, rep.recall_01_0001,
                  rep.pearson, rep.r_squared, rep.f1):
        assert value == pytest.approx(1.0, abs=1e-9)


def test_evaluate_all_fields_finite_and_bounded():
    rep = evaluate_all(random_instance(3, 220), hit_fraction=0.05, alpha=0.5)
    for v in rep.values():
        assert np.isfinite(v)
    for v in (rep.res, rep.aurtc_001, rep.aurtc_0001,
              rep.recall_01_001, rep.recall_01_0001, rep.f1):
        assert 0.0 <= v <= 1.0


def test_evaluate_all_matches_field_oracles():
    p = random_instance(77, 200)
    rep = evaluate_all(p, hit_fraction=0.05, alpha=1.0)
    assert rep.recall_01_001 == oracle_recall(p.y, p.z, 0.1, 0.01)
    assert rep.recall_01_0001 == oracle_recall(p.y, p.z, 0.1, 0.001)
    assert rep.f1 == oracle_f1(p.y, p.z, 0.05)
    w = np.exp(-p.y)
    assert rep.wmse == pytest.approx(np.mean(w * (p.z - p.y) ** 2), abs=1e-12)
    assert rep.pearson == pytest.approx(np.corrcoef(p.y, p.z)[0, 1], abs=1e-9)


def test_report_serialization_roundtrip():
    rep = evaluate_all(random_instance(8, 100), hit_fraction=0.1, alpha=0.0)
    row = rep.to_csv_row()
    assert len(row.split(",")) == len(EvalReport.CSV_HEADER.split(","))
    parsed = [float(v) for v in row.split(",")]
    assert parsed == rep.values()
    assert "pearson" in rep.to_text()


def test_prediction_set_validation():
    with pytest.raises(ShapeError):
        PredictionSet(y=np.ones(3), z=np.ones(4))
    with pytest.raises(ShapeError):
        PredictionSet(y=np.ones(1), z=np.ones(1))
    with pytest.raises(DataError):
        PredictionSet(y=np.array([1.0, np.nan]), z=np.ones(2))
