import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reveuler.convolution import second_moment
from reveuler.data import DataSpec, FitFailure, ProfileParams, RadialProfile, SurrogateProfile
from reveuler.diagnostics import (
    ContractResult,
    DiagnosticsReport,
    blowup_indicator,
    compactified_derivative_check,
    compactify_field,
    contraction_ratios,
    decay_contract,
    decay_envelope_table,
    force_term,
    force_time_l2,
    growth_ratio,
    incompressibility_residual,
    kernel_interior,
    loglog_slope,
    measured_lipschitz,
    moment_bound_check,
    random_lipschitz_field,
    resolved_sup,
    viscosity_sweep,
)
from reveuler.fields import Grid, ScalarField3, make_grid
from reveuler.iteration import IterationConfig, run_picard
from reveuler.kernels import HeatKernelSpec, gauss_eval

SURR = DataSpec(profile=SurrogateProfile(1.0, 1.0))
BLOW_GRIDS = [Grid(1.0, n) for n in (65, 129, 257)]


def small(**kw):
    base = dict(T=0.25, n_steps=8, K_max=5, data=SURR, grid=make_grid(4.0, 17))
    base.update(kw)
    return IterationConfig(**base)


@pytest.fixture(scope="module")
def trace():
    return run_picard(small())


@pytest.fixture(scope="module")
def zero_trace():
    return run_picard(small(data=DataSpec(profile=SurrogateProfile(0.0))))


def test_contraction_table(trace):
    tab = contraction_ratios(trace)
    assert tab.ks() == [1, 2, 3, 4]
    assert 0 < tab.max_ratio(3) < 0.9
    assert all(0 < r < 1 for r in tab.sup.values())


def test_contraction_zero_data_empty(zero_trace):
    tab = contraction_ratios(zero_trace)
    assert tab.per_slice == {} and tab.sup == {}
    assert tab.max_ratio() == 0.0


def test_contraction_needs_five_steps():
    with pytest.raises(ValueError):
        contraction_ratios(run_picard(small(K_max=4)))


def test_decay_table_and_contract(trace):
    tab = decay_envelope_table(trace, slices=[4, 8])
    assert all(math.isfinite(v) for v in tab.values())
    ok, worst = decay_contract(tab)
    assert ok and worst == pytest.approx(1.0)


def test_decay_zero_data(zero_trace):
    tab = decay_envelope_table(zero_trace, which="delta_init", slices=[8])
    assert all(v == 0.0 for v in tab.values())


def test_decay_needs_room():
    tr = run_picard(small(grid=make_grid(2.0, 9), K_max=3))
    with pytest.raises(ValueError):
        decay_envelope_table(tr)


def test_decay_order_sensitivity():
    # order 12 weights grow like R^12 on the same increments; 8 is the certified order
    vals = {}
    for R, n in ((3.0, 13), (4.0, 17)):
        tr = run_picard(small(grid=make_grid(R, n), K_max=3))
        for q in (8, 12):
            tab = decay_envelope_table(tr, order=q, max_derivative=0, which="delta_init", slices=[8])
            vals[(R, q)] = tab[(3, 0, 8)]
    assert vals[(4.0, 12)] / vals[(3.0, 12)] > vals[(4.0, 8)] / vals[(3.0, 8)]


def test_moment_constant_field():
    g = Grid(4.0, 17)
    lhs, rhs = moment_bound_check(np.full(g.shape, 2.0), g, 0.1, 0.25)
    assert lhs <= 1e-12 and rhs == 0.0


def test_moment_linear_field():
    g = Grid(4.0, 33)
    t = 0.5
    lhs, rhs = moment_bound_check(g.mesh()[0], g, 0.1, t, L=1.0)
    assert lhs == pytest.approx(t, rel=0.1)
    assert rhs == pytest.approx(4 * t, rel=1e-8)
    assert lhs <= rhs


@pytest.mark.parametrize("nu", [0.1, 0.05, 0.025])
def test_moment_cone_field_across_nu(nu):
    g = Grid(4.0, 33)
    F = np.minimum(1.0, g.radius)
    for axis in range(3):
        lhs, rhs = moment_bound_check(F, g, nu, 0.25, axis=axis)
        assert lhs <= rhs * (1 + 1e-3)


def test_kernel_interior_shrinks_with_time():
    g = Grid(4.0, 17)
    assert kernel_interior(g, 0.1, 0.1).sum() > kernel_interior(g, 0.1, 1.0).sum()


_mg = Grid(3.0, 25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.2), st.integers(0, 2))
def test_moment_bound_random_lipschitz(seed, nu, axis):
    F = random_lipschitz_field(np.random.default_rng(seed), _mg)
    lhs, rhs = moment_bound_check(F, _mg, nu, 0.25, axis=axis, n_slices=8)
    assert lhs <= rhs * (1 + 1e-3)
    assert measured_lipschitz(F, _mg) > 0


def test_sweep_identical_nu_zero_entry():
    res = viscosity_sweep(small(grid=make_grid(4.0, 13)), [0.1, 0.1, 0.05])
    assert res.matrix[0, 1] == 0.0
    assert res.matrix[0, 2] > 0.0


def test_sweep_needs_three():
    with pytest.raises(ValueError):
        viscosity_sweep(small(), [0.1, 0.05])


def test_incompressibility_growth(trace):
    res = incompressibility_residual(trace)
    assert growth_ratio(res) <= 1.1
    assert growth_ratio({(0, 1): 0.0, (1, 1): 0.0}) == 0.0


def test_loglog_slope_exact_power():
    x = np.array([0.1, 0.2, 0.4, 0.8])
    slope, rms = loglog_slope(x, 3 * x**1.5)
    assert slope == pytest.approx(1.5, abs=1e-12) and rms < 1e-12
    with pytest.raises(FitFailure):
        loglog_slope([1.0], [1.0])


def test_blowup_singular_default():
    res = blowup_indicator(DataSpec(), BLOW_GRIDS)
    assert res.exponent == pytest.approx(-0.05, abs=0.03)
    assert res.kink_order == 1


def test_blowup_lipschitz_bounded():
    res = blowup_indicator(DataSpec(profile=RadialProfile(ProfileParams(0, 0.25, 2.25))), BLOW_GRIDS)
    assert abs(res.exponent) <= 0.01


def test_blowup_kink_order_two():
    res = blowup_indicator(DataSpec(profile=RadialProfile(ProfileParams(2, 0.25, 3.125))), BLOW_GRIDS)
    assert res.kink_order == 2


def test_blowup_needs_three_levels():
    with pytest.raises(FitFailure):
        blowup_indicator(DataSpec(), BLOW_GRIDS[:2])
    with pytest.raises(FitFailure):
        resolved_sup(RadialProfile(), 1, h=1.0, r_probe=0.1)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.8, 2.0))
def test_blowup_smooth_data_bounded(amp, width):
    res = blowup_indicator(DataSpec(profile=SurrogateProfile(amp, width)), BLOW_GRIDS)
    assert abs(res.exponent) <= 0.01 and res.kink_order is None


def test_force_term_basics():
    g = Grid(2.0, 13)
    x1, x2, x3 = g.mesh()
    harmonic = x1 * x1 - x2 * x2 + x3
    assert np.abs(force_term(harmonic, g, 0.3)).max() <= 1e-10
    assert not force_term(np.exp(-(g.radius**2)), g, 0.0).any()
    with pytest.raises(ValueError):
        force_term(harmonic, g, -1.0)


def test_force_term_heat_identity():
    # for omega = G_nut(t): -nu Lap omega = -(nu / nut) d_t G
    nut, t, nu = 0.3, 0.5, 0.1
    errs, hs = [], []
    for n in (25, 49, 97):
        g = Grid(3.0, n)
        pts = np.stack(g.mesh(), axis=-1)
        G = gauss_eval(HeatKernelSpec(nut, t), pts)
        r2 = g.radius**2
        s = nut * t
        dtG = G * (r2 / (4 * s * t) - 1.5 / t)
        inner = (slice(2, -2),) * 3
        errs.append(np.abs(force_term(G, g, nu) + nu / nut * dtG)[inner].max())
        hs.append(g.h)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] > 1.7


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-3, 3))
def test_force_term_linear(nu1, nu2, a):
    g = Grid(2.0, 9)
    w1 = np.exp(-(g.radius**2))
    w2 = np.sin(g.mesh()[1])
    lhs = force_term(w1 + a * w2, g, nu1 + nu2)
    rhs = force_term(w1, g, nu1) + force_term(w1, g, nu2) + a * (force_term(w2, g, nu1) + force_term(w2, g, nu2))
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_force_time_l2_constant_in_time():
    g = Grid(2.0, 9)
    F = np.ones((5,) + g.shape)
    assert force_time_l2(F, np.linspace(0, 2, 5), g) == pytest.approx(2 * 4.0**3)


def test_compactify_constant_and_sup():
    g = Grid(4.0, 33)
    one = compactify_field(ScalarField3(g, np.ones(g.shape)))
    np.testing.assert_allclose(one.values, 1.0)
    f = 1.0 / (1.0 + g.radius**8)
    c = compactify_field(ScalarField3(g, f), n_out=65)
    assert 0.95 * f.max() <= c.values.max() <= f.max() + 1e-15


def test_compactified_derivative_check_on_initial_increment(trace):
    g = trace.config.grid
    inc = trace.delta_init(2)[-1, 0]
    ok, worst = compactified_derivative_check(ScalarField3(g, inc))
    assert ok and worst <= 1.0 + 1e-12


def test_report_summary():
    rep = DiagnosticsReport("abc")
    rep.add(ContractResult("a", True, "fine"))
    rep.add(ContractResult("b", False))
    rep.tables["t"] = (["x"], [(1.0,), (2.0,)])
    assert not rep.passed and rep.all_finite()
    text = rep.summary()
    assert text.splitlines()[0] == "fingerprint abc"
    assert "FAIL  b" in text and text.rstrip().endswith("overall FAIL")
    rep.tables["bad"] = (["x"], [(float("nan"),)])
    assert not rep.all_finite()
