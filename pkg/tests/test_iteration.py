import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reveuler.convolution import TimeSlab, conv_array
from reveuler.data import DataSpec, SurrogateProfile, cutoff_phi1
from reveuler.fields import Grid, NormKind, VectorField3, curl_array, make_grid
from reveuler.iteration import (
    KERNEL_DERIVATIVE,
    IterationConfig,
    IterationState,
    NonFiniteField,
    SignPack,
    biot_savart_crosscheck,
    biot_savart_velocity,
    burgers_array,
    burgers_term,
    picard_init,
    run_picard,
    stretching_array,
    vorticity_increment_recursion,
    vorticity_source,
)
from reveuler.manufactured import ManufacturedSolution

SURR = DataSpec(profile=SurrogateProfile(1.0, 1.0))
ZERO = DataSpec(profile=SurrogateProfile(0.0, 1.0))
INNER = (slice(None),) + (slice(1, -1),) * 3


def small(**kw):
    base = dict(T=0.25, n_steps=8, K_max=4, data=SURR, grid=make_grid(4.0, 17))
    base.update(kw)
    return IterationConfig(**base)


@pytest.fixture(scope="module")
def surrogate_trace():
    return run_picard(small(track_vorticity=True))


def test_burgers_of_constant_and_linear():
    g = Grid(2.0, 11)
    x1 = g.mesh()[0]
    assert np.abs(burgers_array(np.ones((3,) + g.shape) * 0.7, g.h)).max() <= 1e-14
    v = np.stack([x1, 0 * x1, 0 * x1])
    b = burgers_term(VectorField3(g, v)).values
    np.testing.assert_allclose(b[INNER], v[INNER], atol=1e-12)


def test_burgers_matches_closed_form_second_order():
    ms = ManufacturedSolution()
    errs, hs = [], []
    for n in (17, 33, 65):
        g = Grid(5.0, n)
        errs.append(np.abs(burgers_array(ms.u(g), g.h) - ms.burgers(g)).max())
        hs.append(g.h)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] > 1.7


def test_stretching_vanishes_for_rigid_rotation():
    g = Grid(2.0, 21)
    x1, x2, x3 = g.mesh()
    ph = cutoff_phi1(g.radius)
    v = np.stack([-x2 * ph, x1 * ph, 0 * x3])
    w = np.stack([0 * ph, 0 * ph, 2 * ph])
    core = g.radius <= 0.8
    assert np.abs(stretching_array(v, w, g.h)[:, core]).max() <= 1e-12


def test_vorticity_source_of_zero_vorticity():
    cfg = small()
    rng = np.random.default_rng(0)
    v = rng.normal(size=(3,) + cfg.grid.shape)
    assert not vorticity_source(v, np.zeros_like(v), cfg).any()


def test_config_validation():
    with pytest.raises(ValueError):
        small(K_max=2)
    with pytest.raises(ValueError):
        small(T=0.0)
    with pytest.raises(ValueError):
        small(forcing=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        IterationState(-1, None)


def test_zero_data_gives_zero_trace():
    tr = run_picard(small(data=ZERO))
    assert tr.K == 1 and tr.stop_reason == "increment"
    assert not tr.velocity(1).any()


def test_initial_slab_is_heat_evolution():
    cfg = small(grid=make_grid(4.0, 33), T=1.0)
    st0 = picard_init(cfg)
    v = st0.v_slab.values
    # semigroup: slice at t_8 is slice t_4 smoothed for the remaining time
    again = conv_array(v[4], cfg.grid, cfg.nu, cfg.times[8] - cfg.times[4])
    core = cfg.grid.radius <= 2.0
    assert np.abs(again - v[8])[:, core].max() <= 1e-10 * np.abs(v[8]).max()


def test_initial_slab_tends_to_data_as_t_shrinks():
    cfg = small(data=DataSpec(), n_steps=16, T=0.2)
    v = picard_init(cfg).v_slab.values
    gaps = [np.abs(v[j] - v[0]).max() for j in (16, 8, 4, 2, 1)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_first_step_stays_finite_for_singular_data():
    tr = run_picard(small(data=DataSpec(), K_max=3))
    assert np.all(np.isfinite(tr.velocity(tr.K)))


def test_non_finite_forcing_raises():
    cfg = small()
    bad = np.zeros((9, 3) + cfg.grid.shape)
    bad[3, 0, 4, 4, 4] = np.nan
    with pytest.raises(NonFiniteField) as err:
        run_picard(dataclasses.replace(cfg, forcing=bad))
    assert err.value.k == 1


def test_increments_reconstruct_states(surrogate_trace):
    tr = surrogate_trace
    acc = tr.velocity(0).copy()
    for k in range(1, tr.K + 1):
        acc += tr.delta(k)
    assert np.abs(acc - tr.velocity(tr.K)).max() <= 1e-12


def test_increments_contract(surrogate_trace):
    tr = surrogate_trace
    sup = [max(tr.norm(k, j, NormKind.C(2)) for j in range(9)) for k in range(1, tr.K + 1)]
    assert all(b < 0.9 * a for a, b in zip(sup, sup[1:]))


def test_halving_T_shrinks_third_increment():
    def third(T):
        tr = run_picard(small(T=T, K_max=3))
        return max(tr.norm(3, j, NormKind.C(0)) for j in range(9))

    assert third(0.125) <= 0.5 * third(0.25)


def test_vorticity_recursion_identity(surrogate_trace):
    gaps = vorticity_increment_recursion(surrogate_trace)
    assert max(gaps.values()) <= 1e-8


def test_recursion_detects_corruption(surrogate_trace):
    tr = dataclasses.replace(surrogate_trace, states=list(surrogate_trace.states), _norms={})
    s2 = tr.states[2]
    w = s2.w_slab.values.copy()
    w[1:] += 0.01 * np.abs(w).max()
    tr.states[2] = IterationState(2, s2.v_slab, TimeSlab(s2.w_slab.grid, s2.w_slab.times, w))
    assert max(vorticity_increment_recursion(tr).values()) > 1e-3


def test_curl_consistency_second_order():
    gaps, hs = [], []
    for n in (17, 25):
        tr = run_picard(small(grid=make_grid(4.0, n), K_max=3, track_vorticity=True))
        g = tr.config.grid
        c = np.stack([curl_array(tr.velocity(3)[j], g.h) for j in range(9)])
        w = tr.vorticity(3)
        core = g.radius <= 2.0
        gaps.append(np.abs(c - w)[:, :, core].max() / np.abs(w).max())
        hs.append(g.h)
    assert np.log(gaps[0] / gaps[1]) / np.log(hs[0] / hs[1]) >= 1.7


def test_biot_savart_reconstruction_of_swirl():
    # curl of (-x2, x1, 0) e^{-r^2}, reconstructed with the standard orientation
    gaps, hs = [], []
    for n in (33, 49):
        g = Grid(4.0, n)
        x1, x2, x3 = g.mesh()
        e = np.exp(-(g.radius**2))
        v = np.stack([-x2 * e, x1 * e, 0 * e])
        u = biot_savart_velocity(curl_array(v, g.h), g)
        core = g.radius <= 1.5
        gaps.append(np.abs(u - v)[:, core].max() / np.abs(v).max())
        hs.append(g.h)
    assert gaps[-1] < 0.05
    assert np.log(gaps[0] / gaps[1]) / np.log(hs[0] / hs[1]) > 1.7


def test_biot_savart_crosscheck_on_trace(surrogate_trace):
    assert biot_savart_crosscheck(surrogate_trace, surrogate_trace.K, 8) < 0.3


def test_kernel_derivative_form_converges_to_advective():
    gaps = []
    for n in (17, 25):
        a = run_picard(small(K_max=3, grid=make_grid(4.0, n)))
        b = run_picard(small(K_max=3, grid=make_grid(4.0, n), burgers_form=KERNEL_DERIVATIVE))
        core = a.config.grid.radius <= 2.0
        gaps.append(np.abs(a.velocity(3) - b.velocity(3))[:, :, core].max() / np.abs(a.delta_init(3)).max())
    assert gaps[1] < 0.5 * gaps[0]


def test_csv_export(surrogate_trace):
    text = surrogate_trace.to_csv([NormKind.C(0)], header_lines=["note"])
    lines = text.splitlines()
    assert lines[0] == "# note"
    assert lines[1] == "k,t,norm_kind,value,origin_excluded"
    assert len(lines) == 2 + surrogate_trace.K * 9 * 2


def test_sign_pack_mapping():
    assert SignPack().burgers == 1.0 and SignPack().leray == -1.0
    assert SignPack(True, True).burgers == -1.0 and SignPack(True, True).leray == 1.0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 2.0))
def test_picard_linear_in_zero_nonlinearity_limit(amp):
    # first iterate minus base scales quadratically with the data amplitude
    cfg = small(K_max=3, data=DataSpec(profile=SurrogateProfile(amp, 1.0)))
    ref = small(K_max=3)
    a = run_picard(dataclasses.replace(cfg, K_max=3)).delta(1)
    b = run_picard(ref).delta(1)
    np.testing.assert_allclose(a, amp**2 * b, rtol=0, atol=1e-12 * max(1.0, amp**2) * np.abs(b).max() + 1e-15)
