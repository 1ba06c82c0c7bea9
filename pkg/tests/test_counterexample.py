import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oseenlab.core import rotation_matrix
from oseenlab.counterexample import (IndicatorRegion, blowup_ratio, build_item,
                                     certification_threshold, certified_constant,
                                     closed_form_norms, divergence_probe, forcing_norm_sq,
                                     gn_profile, quadrature_norms, sigma_window, slab_integral,
                                     swirl_data_profile, time_mean_identity_check, vn_profile)
from oseenlab.errors import SmallS, ValidationError


def test_build_item_examples():
    item = build_item(10, "sqrt2", 1, 1.0, window="wide")
    assert (item.k_n, item.ell_n) == (-2, 3)
    assert math.isclose(item.sigma_n, 3 - 2 * math.sqrt(2))
    assert math.isclose(item.s_n, -2 * math.sqrt(2))
    item5 = build_item(5, window="wide")
    assert item5.ell_n % 2 == 1
    assert 0.2 <= item5.sigma_n <= 0.4
    with pytest.raises(ValidationError):
        build_item(5, 3, 2)
    with pytest.raises(SmallS):
        build_item(1)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 200), st.sampled_from(["resonant", "wide"]))
def test_items_are_resonant(n, window):
    try:
        item = build_item(n, window=window)
    except SmallS:
        return
    lo, hi = sigma_window(n, window)
    with mpmath.workdps(40):
        sigma = item.k_n * mpmath.sqrt(2) + item.ell_n
        assert lo <= sigma <= hi
    assert item.ell_n % 2 == 1
    assert abs(item.s_n) >= 1 / n
    assert math.isclose(item.s_n + item.ell_n, item.sigma_n, abs_tol=1e-12)


def test_region_examples():
    reg = IndicatorRegion(1.0, 2)
    assert math.isclose(reg.volume, math.pi / 32)
    item = build_item(8)
    g = gn_profile(item)
    assert np.all(g(np.array([[2 / 8, 0.01, 0.01], [0.01, 0.01, 0.01]])) == 0)


def test_closed_form_norm_examples():
    item = build_item(8)
    assert closed_form_norms(item)["normG_sq"] == math.pi / 4
    assert closed_form_norms(build_item(8, lam=2.0))["normG_sq"] == math.pi / 8
    ell_three = build_item(10, window="wide")
    assert math.isclose(forcing_norm_sq(ell_three), 1 / (18 * math.pi))


def test_big_g_is_unit_swirl_on_support():
    item = build_item(16)
    big = swirl_data_profile(item)
    pt = np.array([0.75 / 16, 0.01, 0.02])
    assert math.isclose(np.linalg.norm(big(pt)), 16 ** 1.5)
    assert abs(np.dot(pt, big(pt))) < 1e-14


def test_quadrature_norms_converge():
    item = build_item(16, lam=0.5)
    q = quadrature_norms(item, order=32)
    assert math.isclose(q["normG_sq"], math.pi / 2, rel_tol=1e-10)
    assert math.isclose(q["normg_sq"], forcing_norm_sq(item), rel_tol=1e-6)


def test_time_mean_identity_edge_cases():
    item = build_item(8)
    on_axis = time_mean_identity_check(item, (0.75 / 8, 0.0, 0.0))
    assert on_axis["predicted"] == 0 and on_axis["quadrature_value"] == 0
    outside = time_mean_identity_check(item, (2 / 8, 0.05, 0.0))
    assert outside["predicted"] == 0 and outside["quadrature_value"] == 0
    inside = time_mean_identity_check(item, (0.75 / 8, 0.05, 0.0))
    assert math.isclose(inside["predicted"], 1 / (math.pi * item.ell_n) ** 2)
    assert abs(inside["split_value"] - inside["predicted"]) < 1e-12
    with pytest.raises(ValidationError):
        time_mean_identity_check(item, (0.1, 0.0, 0.0), n_time_nodes=100)


def test_time_mean_against_direct_integral():
    # independent path: average the rotated data pointwise by adaptive quadrature
    item = build_item(8)
    xi = np.array([0.7 / 8, 0.03, -0.06])
    big = swirl_data_profile(item)
    om, ell = item.omega_f, item.ell_n

    def comp(t, part):
        q = rotation_matrix(t, om)
        val = (q @ big(q.T @ xi)) * np.exp(1j * om * ell * t)
        return val.real if part == 0 else val.imag

    period = 2 * math.pi / om
    avg = np.zeros(3, complex)
    brk = list(np.linspace(0, period, 9))
    for c in range(3):
        for part in (0, 1):
            tot = 0.0
            for a, b in zip(brk, brk[1:]):
                tot += integrate.quad(lambda t: comp(t, part)[c], a, b, limit=400, epsabs=1e-13)[0]
            avg[c] += tot / period * (1 if part == 0 else 1j)
    assert np.allclose(avg, gn_profile(item)(xi), atol=1e-8 * 8 ** 1.5)


def test_solution_profile_solves_the_shifted_symbol():
    item = build_item(8)
    xi = np.array([0.7 / 8, 0.03, -0.06])
    d = 1j * (item.sigma_n - item.lam * xi[0]) + xi @ xi
    assert np.allclose(vn_profile(item)(xi) * d, gn_profile(item)(xi))


def test_certification_constants():
    assert math.isclose(certified_constant(1.0), 2 ** -0.5)
    assert math.isclose(certification_threshold(1.0), 8.0)


def test_below_threshold_is_uncertified():
    res = blowup_ratio(build_item(4))
    assert not res.threshold_met and not res.passed


def test_slab_integral_against_2d_quadrature():
    item = build_item(12)
    reg = item.region
    sig, lam = item.sigma_n, item.lam

    def integrand(r, x):
        return 2 * math.pi * r / ((sig - lam * x) ** 2 + (x * x + r * r) ** 2)

    direct, _ = integrate.dblquad(integrand, reg.xi1_lo, reg.xi1_hi, 0, reg.radial_hi,
                                  epsabs=0, epsrel=1e-11)
    assert math.isclose(slab_integral(item), direct, rel_tol=1e-9)


@pytest.mark.parametrize("n", [8, 16, 32])
def test_blowup_ratio_meets_certified_bound(n):
    res = blowup_ratio(build_item(n))
    assert res.threshold_met and res.passed
    assert res.ratio >= certified_constant(1.0) * math.sqrt(n)


def test_wide_window_can_break_the_bound():
    ratios = [(n, blowup_ratio(build_item(n, window="wide"))) for n in (8, 16, 32, 64)]
    assert any(not r.passed for _, r in ratios)


def test_divergence_small_cases():
    one = divergence_probe(n_max=1)
    assert math.isclose(one.certified_sum, certified_constant(1.0))
    assert one.rows[0].skipped
    tab = divergence_probe(n_max=100)
    h100 = sum(1 / k for k in range(1, 101))
    assert math.isclose(tab.certified_sum, certified_constant(1.0) * h100)
    assert tab.certified_sum >= 3.668
    sq = divergence_probe(n_max=100, variant="L2_norm")
    assert math.isclose(sq.certified_sum, 0.5 * h100)
    assert sq.direct_sum > 0
    with pytest.raises(ValidationError):
        divergence_probe(n_max=3, variant="bogus")
