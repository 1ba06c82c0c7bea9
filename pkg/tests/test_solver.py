import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oseenlab.core import (Params, SpectralGrid, TPSeries, apply_resolvent_operator,
                           resolvent_operator_field, zero_field)
from oseenlab.errors import BandwidthUnknown, IrrationalRatio, SingularPoint, ValidationError
from oseenlab.profiles import axial_gaussian, gaussian_poly, gradient_field, radial_scalar
from oseenlab.resonance import classify_ratio
from oseenlab.solver import (ProbeBox, SymbolPoint, assemble_tp, eval_symbol, marcinkiewicz_probe,
                             reduce_s, smoothstep_cutoff, solve_aux_mode, solve_resolvent_rotating,
                             split_modes)

GRID = SpectralGrid(4.0, 15)


def test_symbol_examples():
    pr = Params(1.0, 1.0, s=1.0)
    assert eval_symbol(SymbolPoint(0, (0, 0, 0), pr), "m") == pytest.approx(-1j)
    assert eval_symbol(SymbolPoint(0, (1, 0, 0), pr), "m") == pytest.approx(1)
    with pytest.raises(SingularPoint):
        eval_symbol(SymbolPoint(0, (0, 0, 0), Params(1.0, 1.0, s=0.0)), "m")
    with pytest.raises(ValidationError):
        eval_symbol(SymbolPoint(0, (1, 0, 0), pr), ("mjl", 0, 4))


@given(st.floats(-3, 3), st.integers(-4, 4), st.floats(0.1, 2),
       st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)))
def test_symbols_sum_to_one(s, k, lam, xi):
    # m0 + m1 - m2 + |xi|^2 m = 1 by construction of the denominator
    pr = Params(lam, 0.7, s=s)
    pt = SymbolPoint(k, xi, pr)
    d = 1j * (s + 0.7 * k - lam * xi[0]) + sum(x * x for x in xi)
    if abs(d) < 1e-6:
        return
    total = (eval_symbol(pt, "m0") + eval_symbol(pt, "m1") - eval_symbol(pt, "m2")
             + sum(x * x for x in xi) * eval_symbol(pt, "m"))
    assert total == pytest.approx(1, abs=1e-9)
    trace = sum(eval_symbol(pt, ("mjl", j, j)) for j in (1, 2, 3))
    assert trace == pytest.approx(-sum(x * x for x in xi) * eval_symbol(pt, "m"), abs=1e-9)


def test_aux_mode_gradient_goes_to_pressure():
    phi = radial_scalar()
    u, p = solve_aux_mode(gradient_field(phi), 0, Params(1.0, 1.0, s=0.5))
    pts = np.random.default_rng(0).normal(size=(10, 3))
    assert np.allclose(u(pts), 0, atol=1e-14)
    assert np.allclose(p(pts), -1j * phi(pts))
    z = solve_aux_mode(zero_field(), 3, Params(1.0, 1.0, s=0.5))
    assert np.all(z.velocity(pts) == 0) and np.all(z.pressure(pts) == 0)


def test_aux_mode_flags_kernel():
    sol = solve_aux_mode(axial_gaussian().sample(GRID), -1, Params(1.0, 2.0, s=2.0))
    assert sol.kernel_mode_dropped
    assert np.all(np.isfinite(sol.velocity.values))
    assert not solve_aux_mode(axial_gaussian(), 0, Params(1.0, 2.0, s=2.0), GRID).kernel_mode_dropped


def test_zero_rhs_gives_zero_solution():
    rep = solve_resolvent_rotating(zero_field(), Params(1.0, 1.0, s=0.3), 8, GRID)
    assert rep.residual_interior == 0
    assert np.all(rep.velocity(GRID.points()) == 0)


def test_axisymmetric_input_reduces_to_single_mode():
    pr = Params(0.7, 1.3, s=0.4)
    rep = solve_resolvent_rotating(axial_gaussian(), pr, 8)
    aux = solve_aux_mode(axial_gaussian(), 0, pr)
    pts = np.random.default_rng(2).normal(size=(50, 3))
    assert np.allclose(rep.velocity(pts), aux.velocity(pts), atol=1e-14)


def test_solve_then_apply_recovers_rhs():
    pr = Params(1.2, 0.8, s=-0.6)
    g = gaussian_poly(9, degree=2)
    rep = solve_resolvent_rotating(g, pr, 16, GRID)
    assert rep.residual_interior <= 1e-6
    assert not rep.kernel_mode_dropped
    back = apply_resolvent_operator(rep.velocity, rep.pressure, pr, GRID).field
    ref = g(GRID.points())
    assert np.max(np.abs(back.values - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_too_few_time_nodes_rejected():
    with pytest.raises(ValidationError):
        solve_resolvent_rotating(gaussian_poly(0, degree=2), Params(1, 1, s=0.5), 8, GRID)


def test_unknown_bandwidth_warns_and_estimates_error():
    g = gaussian_poly(1, degree=1).sample(GRID)
    g.bandwidth = None
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        rep = solve_resolvent_rotating(g, Params(1.0, 1.0, s=0.5), 32)
    assert any(issubclass(w.category, BandwidthUnknown) for w in rec)
    assert rep.quadrature_error is not None and rep.quadrature_error < 1e-2


def test_kernel_shift_is_flagged_in_rotating_solve():
    rep = solve_resolvent_rotating(gaussian_poly(2, degree=1), Params(1.0, 1.0, s=2.0), 12, GRID)
    assert rep.kernel_mode_dropped and rep.flags["kernel_mode_dropped"]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(-4, 4))
def test_round_trip_on_manufactured_solutions(seed, lam, omega, s):
    if math.isclose(reduce_s(s, omega), 0, abs_tol=0.05):
        return
    pr = Params(lam, omega, s=s)
    v = gaussian_poly(seed, degree=1, solenoidal=True)
    g = resolvent_operator_field(v, radial_scalar(), pr)
    sol = solve_resolvent_rotating(g, pr, 4 * (g.bandwidth + 2))
    pts = np.random.default_rng(seed).uniform(-2, 2, size=(5, 3))
    want = v(pts)
    assert np.max(np.abs(sol.velocity(pts) - want)) <= 1e-10 * np.max(np.abs(want))


def test_smoothstep_and_reduce():
    assert smoothstep_cutoff(0.4) == 0 and smoothstep_cutoff(1.2) == 1
    assert 0 < smoothstep_cutoff(0.75) < 1
    assert math.isclose(reduce_s(2.3, 1.0), 0.3)
    assert math.isclose(reduce_s(-2.3, 1.0), -0.3)


def test_probe_hits_the_known_value():
    # at eta = 0, xi = (0.5, 0, 0): |N| = 0.25 and the ratio is 4
    rep = marcinkiewicz_probe(Params(1.0, 1.0, s=0.5), ProbeBox(n_points=4096, n_derivative_points=512))
    assert rep.sup_ratio_refined >= 4.0
    assert rep.sup_ratio_refined >= rep.sup_ratio
    assert rep.fitted_c_linear > 0 and rep.sup_derivatives > 0
    with pytest.raises(SingularPoint):
        marcinkiewicz_probe(Params(1.0, 1.0, s=1.0))


def test_mode_split_examples():
    modes = {k: zero_field() for k in (-3, -2, -1, 0, 1, 2, 3)}
    a1, a2 = split_modes(TPSeries(2 * math.pi, modes), 0.5)
    assert a1.indices == list(modes) and a2.indices == []
    ratio = classify_ratio(1, sp.Rational(2, 3))
    a1, a2 = split_modes(TPSeries(2 * math.pi, modes), 2 / 3, ratio)
    assert a1.indices == [-2, 0, 2] and a2.indices == [-3, -1, 1, 3]


def test_tp_single_mode_equals_steady_solve():
    pr = Params(1.0, 1.0)
    f = TPSeries(2 * math.pi, {0: gaussian_poly(3, degree=1)})
    u, p, report = assemble_tp(f, pr, GRID, 12, ratio=classify_ratio(1, 1))
    steady = solve_resolvent_rotating(f.modes[0], pr, 12, GRID)
    pts = GRID.points()[::3, ::3, ::3]
    assert np.allclose(u.modes[0](pts), steady.velocity(pts))
    assert report.rhs_norm > 0


def test_tp_refuses_irrational_ratio():
    f = TPSeries(2 * math.pi / math.sqrt(2), {0: zero_field()})
    with pytest.raises(IrrationalRatio):
        assemble_tp(f, Params(1.0, 1.0, period=f.period), GRID, 8)
