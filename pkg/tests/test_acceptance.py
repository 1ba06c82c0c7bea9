"""One test per acceptance criterion, at the stated tolerances and time budgets."""

import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import sympy as sp

from oseenlab.core import (Params, PhysicalBox, SpectralGrid, TPSeries, leray_project,
                           resolvent_operator_field)
from oseenlab.counterexample import (blowup_ratio, build_item, closed_form_norms, divergence_probe,
                                     gn_profile, quadrature_norms, time_mean_identity_check,
                                     vn_profile)
from oseenlab.errors import IrrationalRatio
from oseenlab.estimates import embedding_probe, fit_embedding_constants, sobolev_exponents
from oseenlab.profiles import gaussian_poly, radial_scalar, swirl_gaussian
from oseenlab.resonance import (approx_below, classify_ratio, min_positive_element,
                                odd_combination_in, parse_number)
from oseenlab.solver import (ProbeBox, assemble_tp, marcinkiewicz_probe, solve_resolvent_rotating,
                             split_modes)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False

    def check(self):
        assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


def harmonic(n):
    return math.fsum(1.0 / k for k in range(1, n + 1))


def test_criterion_01_closed_form_norms():
    n_sym, lam_sym = sp.symbols("n lam", positive=True)
    # amplitude^2 * slab width * half-disc area, with |swirl| = 1 on the support
    exact_big = sp.simplify(n_sym ** 3 * (1 / (lam_sym * n_sym) - 1 / (2 * lam_sym * n_sym))
                            * sp.pi / (2 * n_sym ** 2))
    with Budget(5) as b:
        for lam in (0.5, 1.0, 2.0):
            for n in (8, 16, 32):
                item = build_item(n, "sqrt2", 1, lam)
                cf = closed_form_norms(item)
                assert cf["normG_sq"] == float(exact_big.subs(lam_sym, sp.nsimplify(lam)))
                assert cf["normG_sq"] == math.pi / (4 * lam)
                assert cf["normg_sq"] == 1 / (2 * lam * math.pi * item.ell_n ** 2)
                quad = quadrature_norms(item)
                assert abs(quad["normG_sq"] / cf["normG_sq"] - 1) < 1e-6
                assert abs(quad["normg_sq"] / cf["normg_sq"] - 1) < 1e-6
    b.check()


def test_criterion_02_time_mean_identity():
    rng = np.random.default_rng(2)
    with Budget(10) as b:
        for n in (8, 16, 32):
            item = build_item(n)
            reg = item.region
            width = reg.xi1_hi - reg.xi1_lo
            x_in = rng.uniform(reg.xi1_lo + 0.01 * width, reg.xi1_hi - 0.01 * width, 10)
            x_out = np.concatenate([rng.uniform(0, reg.xi1_lo * 0.99, 5),
                                    rng.uniform(reg.xi1_hi * 1.01, 2 * reg.xi1_hi, 5)])
            for x1 in np.concatenate([x_in, x_out]):
                r = rng.uniform(0.02, 0.98) / n
                th = rng.uniform(-math.pi, math.pi)
                out = time_mean_identity_check(item, (x1, r * math.cos(th), r * math.sin(th)), 4096)
                assert abs(out["quadrature_value"] - out["predicted"]) <= 1e-4
                assert abs(out["split_value"] - out["predicted"]) <= 1e-8
    b.check()


def test_criterion_03_blowup_certification():
    with Budget(30) as b:
        ratios = []
        for n in (8, 16, 32, 64):
            res = blowup_ratio(build_item(n, "sqrt2", 1, 1.0))
            assert res.ratio >= 2 ** -0.5 * math.sqrt(n)
            ratios.append(res.ratio)
        assert all(a <= c for a, c in zip(ratios, ratios[1:]))
    b.check()


def test_criterion_04_divergence_probes():
    h = harmonic(1000)
    with Budget(60) as b:
        a_tab = divergence_probe("sqrt2", 1, 1.0, 1000, "A_norm")
        l2_tab = divergence_probe("sqrt2", 1, 1.0, 1000, "L2_norm")
    b.check()
    assert a_tab.certified_sum >= 2 ** -0.5 * math.log(1000)
    assert abs(a_tab.certified_sum / (2 ** -0.5 * h) - 1) <= 0.02
    assert l2_tab.certified_sum >= 0.5 * math.log(1000)
    assert abs(l2_tab.certified_sum / (0.5 * h) - 1) <= 0.02


def test_criterion_05_solver_round_trip():
    rng = np.random.default_rng(5)
    with Budget(60) as b:
        worst = 0.0
        for i in range(100):
            lam, om = rng.uniform(0.2, 3.0), rng.uniform(0.3, 3.0)
            s = rng.uniform(-5, 5)
            while abs(s - om * round(s / om)) < 0.1:
                s = rng.uniform(-5, 5)
            pr = Params(lam, om, s=s)
            v = gaussian_poly(i, degree=int(rng.integers(0, 3)), solenoidal=True)
            g = resolvent_operator_field(v, radial_scalar(), pr)
            sol = solve_resolvent_rotating(g, pr, 4 * (g.bandwidth + 2))
            node = rng.uniform(-2, 2, 3)
            want = v(node)
            worst = max(worst, float(np.max(np.abs(sol.velocity(node) - want)) / np.max(np.abs(want))))
        assert worst <= 1e-10

        grid = SpectralGrid(4.0, 15)
        for i in range(10):
            pr = Params(rng.uniform(0.5, 2), rng.uniform(0.5, 2), s=rng.uniform(-2, 2))
            g = gaussian_poly(100 + i, degree=int(rng.integers(0, 3)))
            rep = solve_resolvent_rotating(g, pr, 4 * (g.bandwidth + 2), grid)
            assert rep.residual_interior <= 1e-6
    b.check()


def test_criterion_06_loop_closure():
    rng = np.random.default_rng(6)
    with Budget(30) as b:
        for n in (8, 16):
            item = build_item(n)
            g = gn_profile(item)
            sol = solve_resolvent_rotating(g, Params(item.lam, item.omega_f, s=item.s_n),
                                           4 * (g.bandwidth + 2))
            reg = item.region
            x1 = rng.uniform(reg.xi1_lo, reg.xi1_hi, 20)
            r = rng.uniform(0.05, 0.95, 20) / n
            th = rng.uniform(-math.pi, math.pi, 20)
            pts = np.stack([x1, r * np.cos(th), r * np.sin(th)], axis=-1)
            want = vn_profile(item)(pts)
            err = np.max(np.abs(sol.velocity(pts) - want)) / np.max(np.abs(want))
            assert err <= 1e-8
    b.check()


def brute_min_positive(c, d, span=70):
    vals = (Fraction(c * k, d) + ell for k in range(-span, span + 1) for ell in range(-span, span + 1))
    return min(v for v in vals if v > 0)


def test_criterion_07_resonance_arithmetic():
    rng = np.random.default_rng(7)
    with Budget(10) as b:
        pairs = []
        while len(pairs) < 50:
            c, d = (int(x) for x in rng.integers(1, 31, 2))
            if math.gcd(c, d) == 1:
                pairs.append((c, d))
        for c, d in pairs:
            ratio = classify_ratio(sp.Rational(c, d), 1)
            assert (ratio.c, ratio.d) == (c, d)
            assert min_positive_element(ratio, 1.0) == float(brute_min_positive(c, d))

        k, ell, val = approx_below("sqrt2", 1, 1e-6, 10 ** 6)
        assert 0 < val < 1e-6 and abs(k) <= 10 ** 6
        with mpmath.workdps(50):
            assert 0 < k * mpmath.sqrt(2) + ell < mpmath.mpf("1e-6")

        alpha = parse_number("sqrt2")
        for _ in range(20):
            lo = float(rng.uniform(0, 3))
            hi = lo + float(rng.uniform(0.01, 0.5))
            k, ell, val = odd_combination_in(alpha, 1, lo, hi, 10 ** 5)
            assert ell % 2 == 1
            with mpmath.workdps(50):
                exact = k * mpmath.sqrt(2) + ell
                assert lo <= exact <= hi
    b.check()


def test_criterion_08_multiplier_bound_probe():
    with Budget(30) as b:
        sups = []
        for s in (0.5, 0.05, 0.005):
            rep = marcinkiewicz_probe(Params(1.0, 1.0, s=s), ProbeBox(n_points=100_000), refine=False)
            sups.append((s, rep.sup_ratio))
    b.check()
    assert all(a[1] < c[1] for a, c in zip(sups, sups[1:]))
    over = [(s, sup, 4 * (1 + 1 / s)) for s, sup in sups if sup > 4 * (1 + 1 / s)]
    assert not over, f"sampled sup exceeds 4(1 + lam^2/|s|): {over}"


def test_criterion_09_sobolev_exponents():
    assert (sobolev_exponents(3, Fraction(6, 5)).s1, sobolev_exponents(3, Fraction(6, 5)).s2) == \
        (Fraction(12, 7), Fraction(3))
    assert (sobolev_exponents(3, 2).s1, sobolev_exponents(3, 2).s2) == (Fraction(4), None)
    assert (sobolev_exponents(2, Fraction(3, 2)).s1, sobolev_exponents(2, Fraction(3, 2)).s2) == \
        (Fraction(3), None)

    grid = SpectralGrid(6.0, 33)
    box = PhysicalBox.reciprocal(grid)
    lams = [0.1, 1.0, 10.0]
    with Budget(60) as b:
        calibration = [gaussian_poly(seed, degree=2, solenoidal=True) for seed in range(5)]
        calibration += [swirl_gaussian(width=0.7), swirl_gaussian(width=1.5)]
        c_grad, c_fct = fit_embedding_constants(calibration, lams, "6/5", grid, box)
        tab = embedding_probe(swirl_gaussian(), lams, "6/5", grid, box)
    b.check()
    assert tab.variation("grad") < 10 and tab.variation("fct") < 10
    for row in tab.rows:
        assert row.grad_lhs <= c_grad * row.rhs
        assert row.fct_lhs <= c_fct * row.rhs


def test_criterion_10_tp_assembly_gate():
    grid = SpectralGrid(4.0, 15)
    pr = Params(1.0, 1.0, period=math.pi)
    with Budget(60) as b:
        modes = {k: gaussian_poly(10 + k, degree=2) for k in (-2, -1, 0, 1, 2)}
        f = TPSeries(pr.period, modes)
        ratio = classify_ratio(2, 1)
        result = assemble_tp(f, pr, grid, 16, ratio=ratio)
        assert result.max_residual <= 1e-6
        first, second = split_modes(result.velocity, pr.omega, ratio)
        assert set(first.indices) | set(second.indices) == set(modes)
        assert not set(first.indices) & set(second.indices)
        for k in first.indices:
            assert (pr.alpha * k / pr.omega) == int(pr.alpha * k / pr.omega)

        irr = Params(1.0, 1.0, period=2 * math.pi / math.sqrt(2))
        with pytest.raises(IrrationalRatio):
            assemble_tp(TPSeries(irr.period, modes), irr, grid, 16,
                        ratio=classify_ratio(parse_number("sqrt2"), 1))
    b.check()
