import math

import numpy as np
import pytest

from shufflereg import mcoracle
from shufflereg.mcoracle import (
    ASYMPTOTIC,
    EXACT,
    MomentCheckReport,
    all_passed,
    gaussian_identities,
    gaussian_identity_suite,
    mean_check,
    norm_power_checks,
    oracle_moment_check,
    sample_xi_terms,
    variance_check,
    xi_term_formulas,
)
from shufflereg.model import Dimensions
from shufflereg.rng import child_rng
from shufflereg.theory import Spectrum


def test_report_z_and_dict():
    r = mean_check("x", np.array([1.0, 2.0, 3.0]), 2.0)
    assert r.z_score == 0 and r.passed and r.criterion == EXACT
    assert r.as_dict()["pass"] is True and "passed" not in r.as_dict()
    v = variance_check("v", np.array([0.0, 2.0]), 2.0)
    assert v.mc_estimate == 2.0


def test_asymptotic_slack():
    s = np.random.default_rng(0).normal(1.08, 0.01, 1000)
    assert mean_check("a", s, 1.0, criterion=ASYMPTOTIC, c_asym=0.1).passed
    assert not mean_check("a", s, 1.0, criterion=EXACT).passed


def test_identities_with_identity_matrix():
    p = 3
    ids = {name: closed for name, _, closed in gaussian_identities(p, np.eye(p), np.eye(p))}
    # ||x||^4 with M = I: (p + 2) tr M = p (p + 2)
    assert ids["E |x|^2 x'Mx = (p+2) tr M"] == 15
    assert ids["E (x'Mx)^2 = K"] == p * p + 2 * p


def test_identities_exact_by_enumeration_of_small_case():
    # p = 1: every identity reduces to a Gaussian moment of x and y
    M = np.array([[2.0]])
    m4, m6, m8 = 3, 15, 105
    ids = {name: closed for name, _, closed in gaussian_identities(1, M, M)}
    assert ids["E (x'Mx)^2 = K"] == 4 * m4
    assert ids["E |x|^4 x'Mx = (p+2)(p+4) tr M"] == 2 * m6
    assert ids["E |x|^4 (x'Mx)^2 = (p+4)(p+6) K"] == 4 * m8
    assert ids["E |x|^2 (x'Mx)^2 = (p+4) K"] == 4 * m6
    assert ids["E (x'y)^2 y'M1x x'M2y"] == 4 * m4 * m4


@pytest.mark.parametrize("p", [2, 5])
def test_identity_suite_passes(p):
    reps = gaussian_identity_suite(p, None, 100_000, child_rng(1, p))
    assert len(reps) == 8 and all_passed(reps), [r for r in reps if not r.passed]


def test_identity_suite_catches_corruption():
    reps = gaussian_identity_suite(2, None, 100_000, child_rng(1, 2), corrupt=1.5)
    assert not all_passed(reps)


def test_norm_powers():
    assert all_passed(norm_power_checks(4, 200_000, np.random.default_rng(2)))


def test_oracle_moment_check_passes():
    reps = oracle_moment_check(Spectrum([1.0, 0.5, 1.5]), 0.8, 100_000, np.random.default_rng(3))
    assert len(reps) == 5 and all_passed(reps)


def test_variance_check_detects_wrong_sigma():
    from shufflereg.evolution import OracleEdges
    from shufflereg import theory

    spec = Spectrum([1.0] * 4)
    xi = OracleEdges(spec, 1.2).sample_xi(100_000, np.random.default_rng(4))
    assert variance_check("v", xi, theory.oracle_moments(spec, 1.2)[1]).passed
    assert not variance_check("v", xi, theory.oracle_moments(spec, 0.8)[1]).passed


def test_xi_terms_decompose():
    B = np.eye(3)
    s = sample_xi_terms(Dimensions(20, 3, 3, 10), B, 0.7, 50, np.random.default_rng(5))
    assert s.shape == (50, 5)
    assert np.allclose(s[:, 0], s[:, 1] + 0.7 * (s[:, 2] + s[:, 3]) + 0.49 * s[:, 4])


def test_xi_matches_nonoracle_cost_gap():
    from shufflereg.model import ExplicitSpectrum, NoiseSpec, DesignDistribution, generate_instance
    from shufflereg.recovery import nonoracle_cost

    rng = np.random.default_rng(6)
    inst = generate_instance(Dimensions(15, 3, 4, 8), ExplicitSpectrum([1, 1, 1]), NoiseSpec(sigma=0.5), DesignDistribution(), rng)
    C = nonoracle_cost(inst)
    i, j = 3, 7
    # xi = C[i, j] - C[i, pi(i)]
    direct = inst.Y[i] @ inst.Y.T @ inst.X @ (inst.X[inst.pi[i]] - inst.X[j])
    assert np.isclose(direct, C[i, j] - C[i, inst.pi[i]])


def test_xi_term_formulas_keys():
    f = xi_term_formulas(300, 10, 30, 150, 10.0, 10.0)
    assert set(f) == {"E xi1^2", "E xi2^2", "E xi3^2", "E xi4^2", "E xi1 xi4", "E xi2 xi3"}
    assert f["E xi4^2"] == 150 * 100 * 900 / 300


def test_nonoracle_mean_matches_mc():
    reps = mcoracle.xi_term_moments_mc(150, 10, 15, 75, mcoracle.identity_spectrum_signal(10), 1.0, 5000, child_rng(7))
    assert reps[0].name == "E xi" and reps[0].passed
