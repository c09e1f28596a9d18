"""Occupation-measure estimator and its interval structure."""

import math

import pytest

from expexp.bigreal import BigReal
from expexp.distribution import (
    LIMIT_MASSES,
    classify,
    estimate_mu_T,
    interval_structure,
)
from expexp.spiral import ObliqueLine, make_line


def quarter_line(alpha="0.25"):
    return make_line("0", "0", alpha, 192)


def test_classify_threshold_rules():
    line = quarter_line()
    # t = 4 ln 25 ~ 12.875: Re Sigma = 25 cos(12.875) ~ 23.8 > 20
    t_inf = 4 * math.log(25)
    assert classify(line, t_inf, 20.0, 0.1) == "near_inf"
    # shifting by pi flips the sign of the cosine
    assert classify(line, t_inf + math.pi * 2 * 10 + math.pi, 20.0, 0.1) == "near_0"
    # far negative t: |Sigma| < eta, rho near 1
    assert classify(line, -40.0, 20.0, 0.1) == "near_1"
    # t = 0: Sigma = 1, neither big nor near the lattice
    assert classify(line, 0.0, 20.0, 0.1) == "other"


def test_classify_validates_parameters():
    line = quarter_line()
    with pytest.raises(ValueError):
        classify(line, 1.0, 0.5, 0.1)
    with pytest.raises(ValueError):
        classify(line, 1.0, 20.0, 0.7)


def test_masses_sum_exactly_to_one():
    line = quarter_line()
    est = estimate_mu_T(line, 50.0, 20_000, 20.0, 0.1)
    assert sum(est.counts) == est.sample_count
    assert est.mass_0 + est.mass_1 + est.mass_inf + est.mass_other == pytest.approx(1.0, abs=1e-12)


def test_near_one_mass_at_T10_matches_threshold_geometry():
    # |Sigma(t)| = e^{t/4} < eta iff t < 4 ln(eta): mass_1 = (10 + 4 ln 0.1)/20
    line = quarter_line()
    est = estimate_mu_T(line, 10.0, 50_000, 20.0, 0.1)
    expected = (10.0 + 4 * math.log(0.1)) / 20.0
    assert est.mass_1 == pytest.approx(expected, abs=2e-4)


def test_conjugation_symmetry():
    a = estimate_mu_T(quarter_line("0.25"), 50.0, 20_000, 20.0, 0.1)
    b = estimate_mu_T(quarter_line("-0.25"), 50.0, 20_000, 20.0, 0.1)
    assert a.counts == b.counts


def test_masses_at_T500_near_limit():
    # interval oracle gives (0.2429, 0.4908, 0.2425, 0.0238) at T=500
    line = quarter_line()
    est = estimate_mu_T(line, 500.0, 100_000, 20.0, 0.1)
    assert est.mass_0 == pytest.approx(0.2429, abs=0.003)
    assert est.mass_1 == pytest.approx(0.4908, abs=0.003)
    assert est.mass_inf == pytest.approx(0.2425, abs=0.003)
    assert est.mass_other == pytest.approx(0.0238, abs=0.003)
    for m, lim in zip(est.masses, LIMIT_MASSES):
        assert abs(m - lim) <= 0.05


def test_distance_to_limit_decreases():
    line = quarter_line()
    ds = [estimate_mu_T(line, T, 100_000, 20.0, 0.1).distance_to_limit()
          for T in (50.0, 200.0, 800.0)]
    assert ds[0] > ds[1] > ds[2]


def test_interval_structure_values():
    line = quarter_line()
    s = interval_structure(line, 1)
    assert float(s.I_plus[0]) == pytest.approx(2 * math.pi + 1 - math.pi / 2)
    assert float(s.I_plus[1]) == pytest.approx(2 * math.pi + 1 + math.pi / 2)
    assert float(s.I_minus[0] - s.I_plus[0]) == pytest.approx(math.pi)
    assert float(s.I_plus[1] - s.I_plus[0]) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        interval_structure(line, 0)


def test_interval_structure_controls_buckets_for_large_n():
    # for n = 100 at least 99% of grid points in I_n^+ classify near_inf and
    # in I_n^- near_0
    line = quarter_line()
    s = interval_structure(line, 100)
    for iv, want in ((s.I_plus, "near_inf"), (s.I_minus, "near_0")):
        lo, hi = float(iv[0]), float(iv[1])
        n_pts = 400
        good = sum(
            classify(line, lo + (hi - lo) * (i + 0.5) / n_pts, 20.0, 0.1) == want
            for i in range(n_pts)
        )
        assert good >= 0.99 * n_pts


def test_estimator_validates_inputs():
    line = quarter_line()
    with pytest.raises(ValueError):
        estimate_mu_T(line, 0.5, 20_000, 20.0, 0.1)
    with pytest.raises(ValueError):
        estimate_mu_T(line, 50.0, 10, 20.0, 0.1)
