"""Time stepping, monitors, redistribution, and the sign/pinch reports."""

import numpy as np
import pytest

from fmcf import (
    ConfigError,
    FlowConfig,
    RadialSolution,
    StopRules,
    bean_curve,
    build_geometry,
    circle_curve,
    circle_radius_estimate,
    constant_weight,
    convergence_order,
    ellipse_curve,
    isotropic_weight,
    pinch_monitor,
    redistribute_uniform,
    run,
    sign_monitors,
    step,
)

W0 = constant_weight()


def test_config_validation():
    with pytest.raises(ConfigError) as err:
        FlowConfig(dt=-1e-3).validate()
    assert "flow.dt" in str(err.value)
    with pytest.raises(ConfigError):
        FlowConfig(cfl=0.9).validate()
    with pytest.raises(ConfigError):
        FlowConfig(scheme="leapfrog").validate()
    with pytest.raises(ConfigError):
        FlowConfig(t_end=-1.0).validate()
    with pytest.raises(ConfigError):
        FlowConfig.from_config({"dt": "auto", "warp": 9})
    FlowConfig.from_config({"scheme": "rk4", "dt": "auto", "t_end": 0.1})


def test_single_euler_step_on_unit_circle():
    # velocity is exactly -1 * outward normal, so one step moves in by dt
    curve = circle_curve(1.0, 256)
    cfg = FlowConfig(scheme="explicit_euler", dt=1e-3, t_end=1.0)
    nxt = step(curve, W0, cfg)
    radii = np.linalg.norm(nxt.nodes, axis=1)
    assert np.abs(radii - (1.0 - 1e-3)).max() <= 1e-8
    assert nxt.time == pytest.approx(1e-3)
    assert np.array_equal(nxt.node_ids, curve.node_ids)


def test_f_minimal_circle_is_stationary_per_step():
    curve = circle_curve(1.0, 256)
    w = isotropic_weight(1.0)
    dt = 1e-4
    cfg = FlowConfig(scheme="explicit_euler", dt=dt, t_end=1.0)
    nxt = step(curve, w, cfg)
    displacement = np.linalg.norm(nxt.nodes - curve.nodes, axis=1).max()
    assert displacement <= 1e-10 * dt


def test_shrinking_circle_matches_oracle():
    curve = circle_curve(2.0, 256)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=1.5, record_every=200)
    trace = run(curve, W0, cfg)
    assert trace.times[-1] == pytest.approx(1.5, abs=1e-12)
    r_sim = circle_radius_estimate(trace.curves[-1])
    assert abs(r_sim - 1.0) <= 1e-4


@pytest.mark.parametrize("c,t_end", [(-0.5, 0.4), (0.5, 0.4), (1.0, 0.3), (-1.0, 0.25)])
def test_weighted_circle_matches_radial_oracle(c, t_end):
    sol = RadialSolution(n=1, R0=1.0, c=c)
    curve = circle_curve(1.0, 256)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=t_end, record_every=1000)
    trace = run(curve, isotropic_weight(c), cfg)
    r_sim = circle_radius_estimate(trace.curves[-1])
    assert abs(r_sim - sol.radius(t_end)) / sol.radius(t_end) <= 1e-4


def test_expanding_circle_grows():
    # strong isotropic weight outside the stationary radius: H_f < 0, R grows
    sol = RadialSolution(n=1, R0=1.0, c=2.0)
    assert sol.kind == "expanding"
    curve = circle_curve(1.0, 128)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=0.5, record_every=1000)
    trace = run(curve, isotropic_weight(2.0), cfg)
    r_sim = circle_radius_estimate(trace.curves[-1])
    assert r_sim > 1.0
    assert abs(r_sim - sol.radius(0.5)) / sol.radius(0.5) <= 1e-4


def test_scheme_orders_on_shrinking_circle():
    # spatial part is exact on circles, so the time error dominates at large dt
    def final_radius_error(scheme, dt):
        curve = circle_curve(2.0, 64)
        cfg = FlowConfig(scheme=scheme, dt=dt, t_end=0.4, record_every=10**6)
        trace = run(curve, W0, cfg)
        exact = RadialSolution(n=1, R0=2.0, c=0.0).radius(0.4)
        return abs(circle_radius_estimate(trace.curves[-1]) - exact)

    dts = [0.02, 0.01, 0.005]
    eul = convergence_order([(1.0 / dt, final_radius_error("explicit_euler", dt)) for dt in dts])
    rk = convergence_order([(1.0 / dt, final_radius_error("rk4", dt)) for dt in dts])
    assert abs(eul.order - 1.0) <= 0.3
    assert abs(rk.order - 4.0) <= 0.3


def test_run_monitors_min_hf_increases():
    curve = circle_curve(np.sqrt(2.0), 128)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=0.9, record_every=50)
    trace = run(curve, W0, cfg)
    mon = trace.monitors
    assert mon["min_hf"][0] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-10)
    assert np.all(np.diff(mon["min_hf"]) > -1e-12)
    assert trace.stop_reason is None


def test_ellipse_convexity_preserved_with_stop_rule():
    curve = ellipse_curve(2.0, 1.0, 128)
    cfg = FlowConfig(
        scheme="rk4", dt="auto", t_end=0.3, record_every=100,
        stop_on=StopRules(h_negative=1e-6),
    )
    trace = run(curve, W0, cfg)
    assert trace.stop_reason is None  # never triggers: convexity is preserved
    assert trace.times[-1] == pytest.approx(0.3, abs=1e-12)
    assert np.min(trace.monitors["min_h"]) > 0.0


def test_stop_rule_triggers_on_expanding_circle():
    # H_f < 0 immediately: the hf_negative rule stops the run at the first step
    curve = circle_curve(1.0, 128)
    cfg = FlowConfig(
        scheme="rk4", dt="auto", t_end=0.5, record_every=100,
        stop_on=StopRules(hf_negative=1e-6),
    )
    trace = run(curve, isotropic_weight(2.0), cfg)
    assert trace.stop_reason is not None
    assert trace.stop_reason["rule"] == "hf_negative"
    assert trace.times[-1] < 0.5


def test_node_ids_constant_without_redistribution():
    curve = circle_curve(1.0, 64)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=0.1, record_every=10)
    trace = run(curve, W0, cfg)
    for snap in trace.curves:
        assert np.array_equal(snap.node_ids, curve.node_ids)


def test_step_size_sanity_each_step():
    curve = circle_curve(2.0, 128)
    cfg = FlowConfig(scheme="rk4", dt="auto", t_end=1.0, record_every=10**6)
    trace = run(curve, W0, cfg)
    # dt * max|H_f| < min spacing held at every accepted step (checked here
    # a posteriori on the recorded monitor rows)
    mon = trace.monitors
    for k in range(1, len(mon["t"])):
        assert mon["dt"][k] * abs(mon["min_hf"][k]) < 1.0  # coarse sanity
    assert trace.dt_max > 0.0


def test_redistribution_keeps_shape_and_uniformizes():
    curve = ellipse_curve(2.0, 1.0, 128)
    redis = redistribute_uniform(curve)
    seg = redis.chord_lengths()
    assert seg.max() / seg.min() <= 1.02  # nearly uniform arclength
    # shape preserved: resampled nodes stay within one spacing of the polyline
    from fmcf.curve import curve_length

    assert curve_length(redis) == pytest.approx(curve_length(curve), rel=1e-3)
    d = np.linalg.norm(redis.nodes[:, None, :] - curve.nodes[None, :, :], axis=2).min(axis=1)
    assert d.max() <= curve.chord_lengths().max()


def test_redistribution_cadence_in_run():
    curve = ellipse_curve(2.0, 1.0, 64)
    cfg = FlowConfig(
        scheme="rk4", dt="auto", t_end=0.05, record_every=10,
        redistribution="tangential_uniform", redistribute_every=5,
    )
    trace = run(curve, W0, cfg)
    seg = trace.curves[-1].chord_lengths()
    assert seg.max() / seg.min() <= 1.1


def test_sign_monitors_shrinking_circle():
    trace = run(circle_curve(1.0, 64), W0, FlowConfig(dt="auto", t_end=0.2, record_every=50))
    rep = sign_monitors(trace)
    assert rep.hf_preserved and rep.h_preserved
    assert not rep.hf_vacuous and not rep.h_vacuous
    assert rep.first_violation is None


def test_sign_monitors_ellipse_with_quadratic_weight():
    w = isotropic_weight(0.1)
    trace = run(
        ellipse_curve(2.0, 1.0, 128), w, FlowConfig(dt="auto", t_end=0.2, record_every=50)
    )
    rep = sign_monitors(trace)
    assert rep.hf_preserved and rep.h_preserved
    assert not rep.hf_vacuous and not rep.h_vacuous


def test_sign_monitors_bean_vacuous():
    trace = run(bean_curve(128), W0, FlowConfig(dt="auto", t_end=0.02, record_every=20))
    rep = sign_monitors(trace)
    assert rep.h_vacuous  # min h(0) < 0: the preservation statement does not apply
    assert not rep.h_preserved
    assert rep.h_first_violation is not None
    assert rep.h_first_violation[0] == pytest.approx(0.0)


def test_pinch_monitor_circle_hypotheses_met():
    w = isotropic_weight(0.5)
    trace = run(circle_curve(1.0, 128), w, FlowConfig(dt="auto", t_end=0.3, record_every=50))
    rep = pinch_monitor(trace, w)
    assert rep.hypotheses_met
    assert rep.C_squared == pytest.approx(4.0, rel=1e-9)
    assert rep.sup_ratio == pytest.approx(4.0, rel=1e-9)  # achieved at t = 0
    assert rep.lam == pytest.approx(0.5, abs=1e-12)
    assert rep.mu == pytest.approx(0.5, abs=1e-12)


def test_pinch_monitor_unweighted_hypothesis_fails():
    trace = run(circle_curve(1.0, 64), W0, FlowConfig(dt="auto", t_end=0.1, record_every=50))
    rep = pinch_monitor(trace, W0)
    # inf H_f + lam - 2 mu = 1 > 0: vacuous
    assert not rep.hypotheses_met
    assert rep.flags["initial_hf_positive"]
    assert not rep.flags["combined_eigenvalue_condition"]


def test_pinch_monitor_nonpositive_hf_reports_not_raises():
    w = isotropic_weight(2.0)  # H_f(0) = -1 < 0
    trace = run(circle_curve(1.0, 64), w, FlowConfig(dt="auto", t_end=0.1, record_every=50))
    rep = pinch_monitor(trace, w)
    assert not rep.hypotheses_met
    assert rep.C_squared is None


def test_pinch_monitor_scaled_ellipse():
    # arranged so inf H_f ~ 0.1 with lam = mu = 0.2: hypotheses hold
    w = isotropic_weight(0.2)
    curve = ellipse_curve(1.7912, 0.8956, 128)
    trace = run(curve, w, FlowConfig(dt="auto", t_end=0.25, record_every=100))
    rep = pinch_monitor(trace, w)
    assert rep.hypotheses_met
    assert rep.inf_hf_initial == pytest.approx(0.1, abs=5e-3)
    assert rep.sup_ratio <= rep.C_squared * 1.05
