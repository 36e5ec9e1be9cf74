"""Flow module: profiles, implicit stepping, monitors, closed forms."""

import numpy as np
import pytest

from fiberflow.calabi_flow import (
    BadProfile,
    CohomologyClass,
    ConfigError,
    FlowError,
    FlowProblem,
    HirzebruchParams,
    MonotonicityLost,
    PastSingularTime,
    ProductParams,
    RunSettings,
    StepRejected,
    WrongRegime,
    flow_rhs_periodic,
    heat_residual_order,
    hirzebruch_class,
    init_hirzebruch_profile,
    logistic_profile,
    predict_max_time,
    product_class,
    product_closed_form,
    profile_diagnostics,
    run_flow,
    sampler_from_state,
    step_flow,
)
from fiberflow.chart_geometry import (
    calabi_sampler,
    check_kahler_compatibility,
    check_totally_geodesic,
    fd_ricci_oracle,
)
from fiberflow.oneill_curvature import frame_point, vertical_horizontal_curvature


@pytest.fixture(scope="module")
def default_run():
    return run_flow(HirzebruchParams(), RunSettings())


@pytest.fixture(scope="module")
def product_run():
    return run_flow(ProductParams(), RunSettings())


# ---------------------------------------------------------------------------
# initial profiles


def test_tanh_profile_midpoint_value():
    prof = logistic_profile(1.0, 1.0)
    f, f1, f2, _ = prof(0.0)
    assert f == pytest.approx(1.5, abs=1e-12)
    assert f1 == pytest.approx(0.25, abs=1e-12)
    assert f2 == pytest.approx(0.0, abs=1e-12)


def test_init_profile_midpoint_on_grid():
    params = HirzebruchParams(grid_points=501)
    st = init_hirzebruch_profile(params, "tanh")
    mid = np.argmin(np.abs(st.rho))
    assert st.rho[mid] == 0.0
    assert st.f[mid] == pytest.approx(1.5, abs=1e-12)


def test_init_profile_endpoint_closure():
    st = init_hirzebruch_profile(HirzebruchParams(L=20.0), "tanh")
    assert abs(st.f[0] - 1.0) <= 1e-6
    assert abs(st.f[-1] - 2.0) <= 1e-6
    with pytest.raises(BadProfile):
        init_hirzebruch_profile(HirzebruchParams(L=10.0), "tanh")


def test_init_profile_strictly_monotone():
    st = init_hirzebruch_profile(HirzebruchParams(), "tanh")
    assert np.all(st.increments() > 0.0)
    assert np.all(st.v_profile() > 0.0)


def test_init_profile_unknown_shape():
    with pytest.raises(BadProfile):
        init_hirzebruch_profile(HirzebruchParams(), "sawtooth")


def test_skew_profile_runs_and_is_asymmetric():
    params = HirzebruchParams(grid_points=501)
    st = init_hirzebruch_profile(params, "skew")
    mid = np.argmin(np.abs(st.rho))
    assert np.all(st.increments() > 0.0)
    assert abs(st.f[0] - 1.0) <= 1e-6 and abs(st.f[-1] - 2.0) <= 1e-6
    assert abs(st.f[mid] - 1.5) > 1e-3


def test_init_profile_chart_residuals():
    params = HirzebruchParams()
    st = init_hirzebruch_profile(params, "tanh")
    samp = sampler_from_state(st, params)
    rng = np.random.default_rng(3)
    for pt in samp.random_points(rng, 4):
        blocks = samp.evaluate(pt)
        assert check_kahler_compatibility(blocks) <= 1e-8
        assert check_totally_geodesic(blocks) <= 1e-8


# ---------------------------------------------------------------------------
# stepping


def test_single_step_endpoint_rates():
    params = HirzebruchParams()
    problem = FlowProblem(params, RunSettings())
    st = init_hirzebruch_profile(params, "tanh")
    s2 = step_flow(problem, st, 0.01)
    assert (s2.lower - st.lower) / 0.01 == pytest.approx(-1.0, rel=0.02)
    assert (s2.upper - st.upper) / 0.01 == pytest.approx(-3.0, rel=0.02)
    assert np.all(s2.df > 0.0)


def test_endpoint_rates_from_interior_drift():
    # stations at rho = -L/2 and +L/2 track the endpoint motion with
    # exponentially small bias, measuring the PDE rather than the
    # imposed boundary rows
    params = HirzebruchParams(L=14.0, grid_points=512)
    run = run_flow(params, RunSettings(dt_max=0.005))
    rho = run.states[0].rho
    i_lo = int(np.argmin(np.abs(rho + 7.0)))
    i_hi = int(np.argmin(np.abs(rho - 7.0)))
    ts = np.array([s.t for s in run.states])
    sel = (ts >= 0.02) & (ts <= 0.1)
    lo = np.polyfit(ts[sel], [s.f[i_lo] for s in run.states if 0.02 <= s.t <= 0.1], 1)[0]
    hi = np.polyfit(ts[sel], [s.f[i_hi] for s in run.states if 0.02 <= s.t <= 0.1], 1)[0]
    assert lo == pytest.approx(-1.0, rel=0.02)
    assert hi == pytest.approx(-3.0, rel=0.02)


def test_interior_rhs_translation_equivariance():
    n_pts = 64
    j = np.arange(n_pts)
    f = np.exp(0.3 * np.sin(2.0 * np.pi * j / n_pts + 0.37))
    drho = 0.17
    assert np.all(np.abs(np.roll(f, -1) - np.roll(f, 1)) > 0.0)
    shifted_then_rhs = flow_rhs_periodic(np.roll(f, 5), drho, 1, 1, 2.0)
    rhs_then_shifted = np.roll(flow_rhs_periodic(f, drho, 1, 1, 2.0), 5)
    assert np.array_equal(shifted_then_rhs, rhs_then_shifted)


def test_v_evolution_consistency(default_run):
    params = default_run.params
    a, b = default_run.states[30], default_run.states[31]
    dt = b.t - a.t
    va, vb = a.v_profile(), b.v_profile()
    vdot = (vb - va) / dt
    d = a.rho[1] - a.rho[0]
    mids = []
    for st, v in ((a, va), (b, vb)):
        w = np.log(v) + params.n * np.log(st.f)
        w2 = np.full_like(w, np.nan)
        w2[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / d ** 2
        mids.append(w2)
    resid = vdot - 0.5 * (mids[0] + mids[1])
    mask = np.abs(a.rho) <= 10.0
    assert np.nanmax(np.abs(resid[mask])) <= 2e-3


def test_step_flow_rejects_bad_dt():
    params = HirzebruchParams()
    problem = FlowProblem(params, RunSettings())
    st = init_hirzebruch_profile(params, "tanh")
    with pytest.raises(FlowError):
        step_flow(problem, st, 0.0)


def test_oversized_step_is_rejected_not_silently_accepted():
    params = HirzebruchParams()
    problem = FlowProblem(params, RunSettings(max_halvings=0))
    st = init_hirzebruch_profile(params, "tanh")
    with pytest.raises((StepRejected, MonotonicityLost)):
        step_flow(problem, st, 5.0)


def test_run_settings_validation():
    with pytest.raises(ConfigError):
        run_flow(HirzebruchParams(), RunSettings(dt_max=-0.1))
    with pytest.raises(ConfigError):
        run_flow(HirzebruchParams(), RunSettings(stop_margin=0.0))
    with pytest.raises(ConfigError):
        run_flow(HirzebruchParams(), RunSettings(time_frac=1.5))


# ---------------------------------------------------------------------------
# full runs and monitors


def test_run_reaches_stop_with_increasing_times(default_run):
    assert default_run.stop_reason == "time_exhausted"
    ts = [s.t for s in default_run.states]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_observed_vs_predicted_time(default_run):
    ratio = default_run.T_observed / default_run.T_predicted
    assert 0.98 <= ratio <= 1.02


def test_heat_residual_small(default_run):
    worst = np.nanmax([m.heat_residual for m in default_run.monitors])
    assert worst <= 1e-3


def test_heat_residual_convergence_order():
    points, order = heat_residual_order(HirzebruchParams(),
                                        grids=(128, 256, 512))
    assert order >= 1.9
    assert points[0][1] > points[-1][1]


def test_max_f_decays_at_sink_rate(default_run):
    for m in default_run.monitors:
        assert m.max_f_slack <= 1e-9
    maxima = [m.max_f for m in default_run.monitors]
    assert all(b <= a + 1e-12 for a, b in zip(maxima, maxima[1:]))


def test_min_f_stays_above_floor(default_run):
    # lower endpoint drains at rate k - R_h/n = -1, so the floor over
    # the whole run is its value at the singular time: a0 - 1*T = 0.5
    for m in default_run.monitors:
        assert m.min_f >= 0.5 * 0.98


def test_gradient_bound_monitor(default_run):
    assert all(m.grad_bound_ok for m in default_run.monitors)
    sups = [m.grad_f_sq_sup for m in default_run.monitors]
    assert sups[0] == pytest.approx(0.5, rel=0.01)
    assert sups[-1] < sups[0]


def test_width_decay_rate(default_run):
    ts = np.array([m.t for m in default_run.monitors])
    ws = np.array([m.width for m in default_run.monitors])
    slope = np.polyfit(ts, ws, 1)[0]
    k = default_run.params.k
    assert slope == pytest.approx(-2.0 * k, rel=0.02)
    # and the width is exactly linear: residual of the fit is tiny
    fit = np.polyval(np.polyfit(ts, ws, 1), ts)
    assert np.max(np.abs(fit - ws)) <= 1e-8


def test_width_decay_rate_k2():
    params = HirzebruchParams(k=2, grid_points=256)
    run = run_flow(params, RunSettings(stop_margin=0.2))
    ts = np.array([m.t for m in run.monitors])
    ws = np.array([m.width for m in run.monitors])
    slope = np.polyfit(ts, ws, 1)[0]
    assert slope == pytest.approx(-4.0, rel=0.02)


def test_v_floor_stop_reason():
    run = run_flow(HirzebruchParams(), RunSettings(v_floor=0.3))
    assert run.stop_reason == "fiber_collapsed"
    assert run.states[-1].t < run.T_predicted - 0.05


# ---------------------------------------------------------------------------
# profile diagnostics


def test_initial_diagnostics_round_fiber():
    params = HirzebruchParams()
    st = init_hirzebruch_profile(params, "tanh")
    diag = profile_diagnostics(st, params)
    assert diag.k_v_max == pytest.approx(2.0, rel=0.01)
    assert diag.roundness == pytest.approx(1.0, abs=0.005)
    assert diag.a_sq_sup == pytest.approx(0.5, rel=0.01)
    assert diag.grad_ln_sq_sup == pytest.approx(0.25, rel=0.01)
    assert diag.horiz_sup == pytest.approx(2.0, rel=1e-6)
    assert diag.rm_sup == pytest.approx(np.sqrt(32.0), rel=0.01)
    assert diag.fiber_area == pytest.approx(2.0 * np.pi, rel=1e-9)


def test_diagnostics_track_collapse(default_run):
    first, last = default_run.diagnostics[0], default_run.diagnostics[-1]
    assert last.rm_sup > 100.0 * first.rm_sup
    assert last.a_sq_sup < 0.05 * first.a_sq_sup
    assert last.roundness == pytest.approx(1.0, abs=0.005)
    remaining = default_run.T_observed - last.t
    assert remaining * last.rm_sup == pytest.approx(2.0, rel=0.05)


def test_diagnostics_require_surface_base():
    params = HirzebruchParams(n=2)
    st = init_hirzebruch_profile(params, "tanh")
    with pytest.raises(FlowError):
        profile_diagnostics(st, params)


def test_vhc_profile_forms_match_chart_curvature():
    # analytic profile-level mixed-curvature values against the frame
    # computation on the full 2-complex-dimensional chart
    prof = logistic_profile(1.0, 1.0)
    samp = calabi_sampler(prof, n=1, k=1)
    rho0 = 0.4
    pt = np.array([0.0, 0.0, np.exp(rho0 / 2.0), 0.0])
    fp = frame_point(samp, pt)
    vhc_chart = vertical_horizontal_curvature(fp)

    f, f1, f2, f3 = prof(rho0)
    v, v1 = f1, f2
    lf1 = v / f
    lf2 = v1 / f - lf1 ** 2
    lv1 = v1 / v
    gsq = 2.0 * v / f ** 2
    hess_rr = (2.0 / v) * (lf2 - 0.5 * lv1 * lf1)
    hess_tt = (1.0 / v) * lv1 * lf1
    vhc_r = -0.5 * (hess_rr + gsq) + 0.25 * gsq
    vhc_t = -0.5 * hess_tt + 0.25 * gsq
    got = np.sort(vhc_chart[:, 0])
    want = np.sort(np.array([vhc_r, vhc_t]))
    assert np.max(np.abs(got - want)) <= 1e-4


def test_s_constancy_on_reconstructed_charts(default_run):
    rng = np.random.default_rng(11)
    params = default_run.params
    for idx in (0, len(default_run.states) // 2):
        st = default_run.states[idx]
        samp = sampler_from_state(st, params)
        for pt in samp.random_points(rng, 2):
            blocks = samp.evaluate(pt)
            ric = fd_ricci_oracle(samp, pt)
            ratio = ric.mixed[0] / ric.fiber
            assert abs(ratio - blocks.s[0]) <= 1e-4 * abs(blocks.s[0])


# ---------------------------------------------------------------------------
# product scenario and cohomology bookkeeping


def test_product_run_matches_closed_form(product_run):
    for st in product_run.states:
        if st.t == 0.0:
            continue
        f, c, kv = product_closed_form(3.0, 1.0, 2.0, 1, st.t)
        assert abs(st.f - f) <= 1e-6
        assert abs(st.c - c) <= 1e-6
    assert abs(product_run.T_observed - 0.5) <= 1e-3


def test_product_plateau(product_run):
    last = product_run.diagnostics[-1]
    remaining = product_run.T_observed - last.t
    assert remaining * last.rm_sup == pytest.approx(2.0, rel=0.05)
    assert last.roundness == 1.0


def test_product_closed_form_values():
    assert product_closed_form(3.0, 2.0, 2.0, 1, 0.0) == (3.0, 2.0, 1.0)
    f, c, kv = product_closed_form(3.0, 2.0, 2.0, 1, 0.5)
    assert (f, c, kv) == (2.0, 1.0, 2.0)
    with pytest.raises(PastSingularTime):
        product_closed_form(3.0, 1.0, 2.0, 1, 0.5)
    with pytest.raises(PastSingularTime):
        product_closed_form(1.0, 4.0, 2.0, 1, 0.6)


def test_predict_max_time_product_classes():
    t_max, limit = predict_max_time(CohomologyClass(3.0, 1.0, -2.0, -2.0))
    assert t_max == pytest.approx(0.5)
    assert limit.fiber_coeff == 0.0
    assert limit.base_coeff == pytest.approx(2.0)
    with pytest.raises(WrongRegime):
        predict_max_time(CohomologyClass(1.0, 3.0, -2.0, -2.0))


def test_predict_requires_shrinking_fiber():
    with pytest.raises(WrongRegime):
        predict_max_time(CohomologyClass(1.0, 1.0, -2.0, 2.0))
    with pytest.raises(WrongRegime):
        predict_max_time(CohomologyClass(-1.0, 1.0, -2.0, -2.0))


def test_class_builders_frozen_rates():
    cls = hirzebruch_class(HirzebruchParams())
    assert (cls.base_coeff, cls.fiber_coeff) == (1.0, 1.0)
    assert (cls.c1_base_rate, cls.c1_fiber_rate) == (-1.0, -2.0)
    pcls = product_class(ProductParams())
    assert (pcls.base_coeff, pcls.fiber_coeff) == (3.0, 1.0)
    assert (pcls.c1_base_rate, pcls.c1_fiber_rate) == (-2.0, -2.0)


def test_predicted_time_matches_observed(default_run):
    t_max, _ = predict_max_time(hirzebruch_class(default_run.params))
    assert t_max == default_run.T_predicted
    assert abs(default_run.T_observed - t_max) / t_max <= 0.02
