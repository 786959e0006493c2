import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from shufflereg import theory
from shufflereg.theory import DivergenceError, NoFiniteThreshold, Spectrum

# printed oracle thresholds at n = 500, scaled identity
TABLE1 = {20: 3.283, 30: 1.415, 40: 0.902, 50: 0.662, 60: 0.523, 70: 0.432,
          100: 0.284, 110: 0.255, 120: 0.231, 130: 0.211, 140: 0.195, 150: 0.181}


def mgf_by_quadrature(theta, lam, sigma):
    # integrate y out analytically, then (x, w) numerically
    def f(w, x):
        a = lam**2 * x * x + sigma * lam * w * x
        b = lam**2 * x + sigma * lam * w
        return math.exp(-theta * a + 0.5 * theta**2 * b * b - 0.5 * (x * x + w * w)) / (2 * math.pi)

    val, _ = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-11, epsrel=1e-10)
    return val


def test_spectrum_basics():
    s = Spectrum([2.0, 1.0])
    assert s.rank == 2 and s.fro2 == 5 and s.fro4 == 17
    assert s.shape_factor == pytest.approx(17 / 25)
    assert Spectrum.two_level(5, 1.0, 0.5).values == (1, 1, 1, 0.5, 0.5)
    B = np.diag([3.0, 1.0, 0.0])
    assert Spectrum.from_matrix(B).values == (3.0, 1.0)
    assert s.scaled(2).fro2 == 20
    assert s.sigma_for_snr(5, math.inf) == 0
    with pytest.raises(ValueError):
        Spectrum([])
    with pytest.raises(ValueError):
        Spectrum([1.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30))
def test_shape_factor_bounds(vals):
    s = Spectrum(vals)
    assert 1 / s.rank - 1e-12 <= s.shape_factor <= 1 + 1e-12


@pytest.mark.parametrize("lam,sigma,theta", [(1.0, 0.5, 0.2), (0.7, 1.0, 0.3), (1.3, 0.2, 0.1)])
def test_log_mgf_matches_quadrature(lam, sigma, theta):
    spec = Spectrum([lam])
    assert theta < theory.oracle_theta_max(spec, sigma)
    got = math.exp(theory.oracle_log_mgf(theta, spec, sigma))
    assert got == pytest.approx(mgf_by_quadrature(theta, lam, sigma), rel=1e-6)


def test_log_mgf_factorizes_and_vanishes_at_zero():
    spec = Spectrum([1.0, 0.5, 2.0])
    total = theory.oracle_log_mgf(0.05, spec, 0.3)
    parts = sum(theory.oracle_log_mgf(0.05, Spectrum([v]), 0.3) for v in spec.values)
    assert total == pytest.approx(parts)
    assert abs(theory.oracle_log_mgf(1e-12, spec, 0.3)) < 1e-9


def test_log_mgf_divergence():
    spec = Spectrum([1.0])
    tmax = theory.oracle_theta_max(spec, 1.0)
    with pytest.raises(DivergenceError):
        theory.oracle_log_mgf(tmax * 1.01, spec, 1.0)
    with pytest.raises(DivergenceError):
        theory.oracle_log_mgf(1.5, spec, 1.0)  # theta sigma lam >= 1


def test_drift_matches_bounded_minimizer():
    spec = Spectrum([1.0] * 50)
    for sigma in (0.3, 1.0, 3.0):
        tmax = theory.oracle_theta_max(spec, sigma)
        ref = optimize.minimize_scalar(
            lambda t: theory.oracle_drift_objective(t, 200, spec, sigma),
            bounds=(tmax * 1e-6, tmax * (1 - 1e-9)), method="bounded", options={"xatol": 1e-12},
        ).fun
        assert theory.oracle_drift(200, spec, sigma) <= ref + 1e-7 * abs(ref)


def test_drift_signs_and_monotone_in_n():
    spec = Spectrum([3.0] * 200)
    assert theory.oracle_drift(500, spec, 0.01) < 0
    s = Spectrum([1.0] * 20)
    assert theory.oracle_drift(100, s, 1.0) < theory.oracle_drift(1000, s, 1.0)


def test_bound_point_near_zero_at_threshold():
    spec, n, m = Spectrum([1.0] * 100), 500, 100
    snr = theory.oracle_snr_threshold(n, m, spec.shape_factor)
    sigma = spec.sigma_for_snr(m, snr)
    t = theory.oracle_theta_star_lb(n, spec, sigma)
    assert abs(theory.oracle_drift_objective(t, n, spec, sigma)) < 0.05 * spec.fro2
    assert theory.oracle_drift(n, spec, sigma) <= theory.oracle_drift_objective(t, n, spec, sigma)


def test_theta_star_lb_is_the_minimizer():
    spec, n, sigma = Spectrum([1.0, 0.4]), 300, 0.7
    V = spec.fro4 + 2 * sigma**2 * spec.fro2
    ref = optimize.minimize_scalar(lambda t: math.log(n) / t + t * V / 2, bounds=(1e-6, 100), method="bounded",
                                   options={"xatol": 1e-12}).x
    assert theory.oracle_theta_star_lb(n, spec, sigma) == pytest.approx(ref, rel=1e-6)
    assert theory.oracle_theta_star_lb(math.e**2, Spectrum([1.0]), 0.0) == pytest.approx(2.0)
    assert theory.oracle_theta_star_lb(100, Spectrum([1.0]), 1e6) < 1e-5


@pytest.mark.parametrize("m,printed", sorted(TABLE1.items()))
def test_table1_predictions(m, printed):
    assert abs(theory.oracle_snr_threshold(500, m, 1 / m) - printed) <= 5e-4


def test_gaussian_threshold_examples():
    L = math.log(500)
    assert theory.oracle_snr_threshold_gaussian(500, 100, 0.01) == pytest.approx(4 * L / (100 - 6 * L), rel=1e-12)
    big = [theory.oracle_snr_threshold_gaussian(500, m, 1 / m) / theory.oracle_snr_threshold(500, m, 1 / m) for m in (1e3, 1e6)]
    assert big[0] > 1 and abs(big[1] - 1) < 1e-4
    assert theory.oracle_snr_threshold(500, 10**8, 1e-8) == pytest.approx(4 * L / 1e8, rel=1e-6)


def test_no_finite_threshold():
    with pytest.raises(NoFiniteThreshold):
        theory.oracle_snr_threshold(3, 1, 1.0)
    with pytest.raises(NoFiniteThreshold):
        theory.oracle_snr_threshold_gaussian(500, 30, 1 / 30)
    with pytest.raises(ValueError):
        theory.oracle_snr_threshold(500, 10, 0.0)


def test_oracle_moments():
    assert theory.oracle_moments(Spectrum([1.0, 2.0]), 0.5) == (5.0, 3 * 17 + 2 * 0.25 * 5)


def test_nonoracle_moments_small_tau_p_limit():
    n, h, fro2, fro4 = 10**6, 5 * 10**5, 10.0, 10.0
    mo = theory.nonoracle_moments(n, 10, 1, h, fro2, fro4, 1.0)
    assert mo.mean == pytest.approx(n * 0.5 * fro2, rel=1e-4)
    assert mo.variance == pytest.approx(3 * n**2 * 0.25 * fro4, rel=1e-4)
    with pytest.raises(ValueError):
        theory.nonoracle_moments(10, 2, 2, 11, 1, 1, 1)


def test_nonoracle_moments_by_hand():
    # n=10, m=2, p=5, h=4, fro2=3, fro4=5, sigma=1
    tp, th = 0.5, 0.4
    mean = 10 * 0.6 * (1.5 * 3 + 2 * tp)
    var = 100 * th * 0.6 * tp**2 * 25 + 100 * (1 + 3 * 0.36) * 5 + 100 * (6 * tp * 0.36 + 2.6 * tp**2) * 5
    mo = theory.nonoracle_moments(10, 2, 5, 4, 3.0, 5.0, 1.0)
    assert mo.mean == pytest.approx(mean) and mo.variance == pytest.approx(var)


def test_nonoracle_threshold_is_a_root():
    spec = Spectrum([1.0] * 1000)
    t = theory.nonoracle_snr_threshold(10000, 1000, 1000, 5000, spec)
    assert abs(theory.nonoracle_criticality(t, 10000, 1000, 1000, 5000, spec)) < 1e-6 * theory.nonoracle_moments(
        10000, 1000, 1000, 5000, spec.fro2, spec.fro4, spec.sigma_for_snr(1000, t)).mean ** 2
    assert theory.nonoracle_criticality(t * 0.9, 10000, 1000, 1000, 5000, spec) > 0
    assert theory.nonoracle_criticality(t * 1.1, 10000, 1000, 1000, 5000, spec) < 0
    # same-order spectrum at high rank: close to the closed form
    cf = theory.nonoracle_snr_closed_form(10000, 0.1, 0.5)
    assert abs(t / cf.snr - 1) < 0.06


def test_nonoracle_threshold_none_beyond_singularity():
    spec = Spectrum([1.0] * 40)
    assert theory.nonoracle_snr_threshold(400, 40, 40, 396, spec) is None
    with pytest.raises(ValueError):
        theory.nonoracle_snr_threshold(400, 40, 40, 1, spec)


def test_closed_form_example():
    cf = theory.nonoracle_snr_closed_form(1000, 0.1, 0.5)
    L = math.log(500)
    eta1 = 2 * 0.5 * 0.01 * L - 0.1 * 1.1 * 0.5 + 0.1 * math.sqrt(2 * 0.25 * L)
    eta2 = 0.5 * 1.21 - 2 * 0.5 * 0.01 * L
    assert cf.eta1 == pytest.approx(eta1) and cf.eta2 == pytest.approx(eta2)
    assert cf.snr == pytest.approx(0.338, abs=5e-4) and cf.regime == "ok"


def test_closed_form_regimes():
    assert theory.nonoracle_snr_closed_form(1000, 0.1, 0.0011).regime == "below-validity"
    cf = theory.nonoracle_snr_closed_form(1000, 0.1, 0.95)
    assert cf.regime == "singular" and math.isinf(cf.snr)
    with pytest.raises(ValueError):
        theory.nonoracle_snr_closed_form(1000, 0.1, 1.0)


def test_tau_h_singularity():
    t = theory.tau_h_singularity(1000, 0.1)
    assert 0.89 < t < 0.91
    assert theory.eta2(1000, 0.1, 0.89) > 0 > theory.eta2(1000, 0.1, 0.91)
    assert abs(theory.eta2(1000, 0.1, t)) < 1e-5
    assert theory.tau_h_singularity(1000, 1e-6) is None
    # grows with n at a fixed number of covariates
    assert theory.tau_h_singularity(400, 40 / 400) < theory.tau_h_singularity(800, 40 / 800)
