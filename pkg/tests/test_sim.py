import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heli_lqr.control import BoundedController, ControlLimits
from heli_lqr.errors import IntegrationError, ValidationError
from heli_lqr.model import STATE_INDEX, RigidBodyState
from heli_lqr.sim import (
    CSV_HEADER,
    Arc,
    Hold,
    Line,
    ReferenceTrajectory,
    SimConfig,
    body_to_local_horizon,
    dcm_body_from_inertial,
    gnuplot_script,
    make_rect_circle,
    make_rectangle,
    rk4_step,
    run_closed_loop,
)

from oracles import polyline_length, rk4_linear_factor, rotation_product

angle = st.floats(-math.pi, math.pi)
CORNERS = [(0, 0, 50), (400, 0, 50), (400, 200, 50), (0, 200, 50)]


def test_dcm_examples():
    np.testing.assert_array_equal(dcm_body_from_inertial(0, 0, 0), np.eye(3))
    T = dcm_body_from_inertial(0, 0, math.pi / 2)
    np.testing.assert_allclose(T, [[0, 1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-15)


@given(angle, st.floats(-1.5, 1.5), angle)
def test_dcm_matches_rotation_product(phi, theta, psi):
    np.testing.assert_allclose(dcm_body_from_inertial(phi, theta, psi), rotation_product(phi, theta, psi), atol=1e-14)


def test_body_to_local_horizon_examples():
    v = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(body_to_local_horizon(v, 0, 0, 0), v)
    np.testing.assert_allclose(body_to_local_horizon([1, 0, 0], 0, 0, math.pi / 2), [0, 1, 0], atol=1e-15)


@given(angle, angle, angle, st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)))
def test_body_to_local_horizon_norm(phi, theta, psi, v):
    out = body_to_local_horizon(v, phi, theta, psi)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(v), abs=1e-12)
    np.testing.assert_allclose(out, dcm_body_from_inertial(phi, theta, psi).T @ np.asarray(v), atol=1e-12)


def test_rk4_examples():
    assert np.array_equal(rk4_step(lambda t, x: np.zeros_like(x), np.array([2.5]), 0.0, 0.1), [2.5])
    x1 = rk4_step(lambda t, x: -x, np.array([1.0]), 0.0, 0.1)[0]
    assert x1 == pytest.approx(0.9048375, abs=5e-8)
    assert x1 == pytest.approx(rk4_linear_factor(-1.0, 0.1), abs=1e-15)
    assert abs(x1 - math.exp(-0.1)) < 1e-7


def test_rk4_uses_time_argument():
    # x' = t from 0 over one step is exact for a polynomial of degree <= 4
    x = rk4_step(lambda t, x: np.array([t**3]), np.array([0.0]), 1.0, 0.5)
    assert x[0] == pytest.approx((1.5**4 - 1) / 4, abs=1e-14)


def test_rk4_non_finite():
    with pytest.raises(IntegrationError):
        rk4_step(lambda t, x: x * np.nan, np.array([1.0]), 0.0, 0.1)


def test_rectangle_examples():
    ref = make_rectangle(CORNERS, speed=20.0, hold_time=5.0)
    np.testing.assert_array_equal(ref.position_at(0.0), CORNERS[0])
    length = polyline_length(CORNERS + [CORNERS[0]])
    assert length == 2 * (400 + 200)
    assert ref.duration == pytest.approx(length / 20.0 + 4 * 5.0)
    np.testing.assert_allclose(ref.end, CORNERS[0])


def test_rectangle_visits_corners_in_order():
    ref = make_rectangle(CORNERS, speed=20.0, hold_time=5.0)
    t = 0.0
    for k, side in enumerate((400, 200, 400, 200)):
        np.testing.assert_allclose(ref.position_at(t + 2.5), CORNERS[k])
        t += 5.0 + side / 20.0
        np.testing.assert_allclose(ref.position_at(t - 1e-9), CORNERS[(k + 1) % 4], atol=1e-7)


def test_degenerate_rectangle():
    with pytest.raises(ValidationError):
        make_rectangle([(0, 0, 0), (1, 0, 0), (1, 0, 0), (0, 1, 0)])
    with pytest.raises(ValidationError):
        make_rectangle(CORNERS, speed=0.0)


def test_reference_is_continuous():
    ref = make_rect_circle(CORNERS)
    ts = np.linspace(0, ref.duration, 40001)
    p = ref.positions(ts)
    step = np.linalg.norm(np.diff(p, axis=0), axis=1)
    # top speed is 20 ft/s on the legs and 20 ft/s on the circle
    assert step.max() <= 20.0 * (ts[1] - ts[0]) * (1 + 1e-6)


def test_circle_radius_and_tangency():
    ref = make_rect_circle(CORNERS, radius=100.0, angular_rate=0.2)
    arc = ref.segments[-1]
    assert isinstance(arc, Arc)
    t0 = ref.duration - arc.sweep / abs(arc.angular_rate)
    ts = np.linspace(t0, ref.duration, 2001)
    d = np.linalg.norm(ref.positions(ts) - np.asarray(arc.center), axis=1)
    assert np.abs(d - 100.0).max() < 1e-9
    # leaves the last corner along the closing leg, which heads West
    v = (ref.position_at(t0 + 1e-4) - ref.position_at(t0)) / 1e-4
    assert v[0] == pytest.approx(0.0, abs=1e-2) and v[1] == pytest.approx(-20.0, rel=1e-4)


def test_arc_must_start_on_circle():
    with pytest.raises(ValidationError):
        ReferenceTrajectory([Hold((0, 0, 0), 1.0), Arc((500, 0, 0), 10.0, 0.1, 1.0)])


def test_segment_trajectory():
    ref = ReferenceTrajectory([Line((10, 0, 0), 5.0), Hold((10, 0, 0), 1.0)], start=(0, 0, 0))
    assert ref.duration == pytest.approx(3.0)
    np.testing.assert_allclose(ref.position_at(1.0), (5, 0, 0))


def test_sim_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(dt=0.0)
    with pytest.raises(ValidationError):
        SimConfig(dt=0.1, duration=0.05)
    assert SimConfig(dt=0.005, duration=1.0).n_records == 201


def test_dt_must_resolve_rotor(cruise_model, case3_solution):
    ref = ReferenceTrajectory([Hold((0, 0, 0), 1.0)])
    with pytest.raises(ValidationError, match="tau_f"):
        run_closed_loop(cruise_model, BoundedController(case3_solution.F), ref, SimConfig(dt=0.01, duration=1.0))


def test_equilibrium(cruise_model, case3_solution):
    ref = ReferenceTrajectory([Hold((0, 0, 0), 3.0)])
    out = run_closed_loop(cruise_model, BoundedController(case3_solution.F), ref, SimConfig(duration=3.0), eta=5.0)
    for arr in (out.state, out.u_raw, out.u, out.velocity, out.position, out.error):
        assert not arr.any()
    assert len(out) == 601


def test_hold_offset_converges_case3(cruise_model, case3_solution):
    """Held offset within the linear range: error falls below 5% of its initial size."""
    ref = ReferenceTrajectory([Hold((0.01, -0.01, 0.01), 20.0)])
    out = run_closed_loop(cruise_model, BoundedController(case3_solution.F), ref, SimConfig(duration=20.0), eta=5.0)
    e = np.linalg.norm(out.error, axis=1)
    assert e[-1] < 0.05 * e[0]
    assert np.all(case3_solution.closed_loop_spectrum.real < 0)


def test_hold_offset_converges_case3_unbounded(cruise_model, case3_solution):
    ref = ReferenceTrajectory([Hold((5.0, -3.0, 2.0), 20.0)])
    ctrl = BoundedController(case3_solution.F, ControlLimits.unbounded())
    out = run_closed_loop(cruise_model, ctrl, ref, SimConfig(duration=20.0), eta=5.0)
    e = np.linalg.norm(out.error, axis=1)
    assert e[-1] < 0.05 * e[0]


def test_determinism(cruise_model, case3_solution):
    ref = make_rectangle(CORNERS)
    cfg = SimConfig(duration=4.0, initial_position=(0, 0, 49.0))
    ctrl = BoundedController(case3_solution.F)
    a = run_closed_loop(cruise_model, ctrl, ref, cfg, eta=5.0)
    b = run_closed_loop(cruise_model, ctrl, ref, cfg, eta=5.0)
    assert a.to_csv() == b.to_csv()


def test_linearity_small_state(cruise_model, case3_solution):
    ctrl = BoundedController(case3_solution.F, ControlLimits.unbounded())
    ref = ReferenceTrajectory([Hold((0, 0, 0), 2.0)])
    x0 = np.zeros(14)
    x0[STATE_INDEX["u"]], x0[STATE_INDEX["q"]] = 1e-8, -2e-9

    def run(scale):
        cfg = SimConfig(duration=2.0, initial_state=RigidBodyState.from_array(scale * x0))
        return run_closed_loop(cruise_model, ctrl, ref, cfg, eta=5.0)

    a, b = run(1.0), run(2.0)
    assert not a.saturated.any()
    scale = np.abs(a.state).max()
    assert np.abs(b.state - 2 * a.state).max() <= 1e-9 * 2 * scale
    np.testing.assert_allclose(b.u, 2 * a.u, rtol=0, atol=1e-9 * 2 * np.abs(a.u).max())


def test_saturation_flags(cruise_model, case3_solution):
    ref = ReferenceTrajectory([Hold((2.0, 0, 0), 1.0)])
    out = run_closed_loop(cruise_model, BoundedController(case3_solution.F), ref, SimConfig(duration=1.0), eta=5.0)
    assert out.saturated.any()
    np.testing.assert_array_equal(out.saturated, out.u != out.u_raw)
    lim = ControlLimits.default()
    assert np.all((out.u >= lim.lower) & (out.u <= lim.upper))


def test_position_integrates_local_horizon_velocity(cruise_model):
    """Open loop from a forward speed at 90 deg heading drifts East."""
    ctrl = BoundedController(np.zeros((4, 17)))
    x0 = np.zeros(14)
    x0[STATE_INDEX["u"]], x0[STATE_INDEX["psi"]] = 10.0, math.pi / 2
    cfg = SimConfig(duration=0.01, dt=0.005, initial_state=RigidBodyState.from_array(x0))
    out = run_closed_loop(cruise_model, ctrl, ReferenceTrajectory([Hold((0, 0, 0), 1.0)]), cfg)
    assert out.velocity[0] == pytest.approx([0.0, 10.0, 0.0], abs=1e-12)
    assert out.position[1, 1] > 0 and abs(out.position[1, 0]) < 1e-6


def test_csv_and_gnuplot(cruise_model, tmp_path):
    ctrl = BoundedController(np.zeros((4, 17)))
    out = run_closed_loop(cruise_model, ctrl, ReferenceTrajectory([Hold((0, 0, 0), 1.0)]), SimConfig(duration=0.02))
    text = out.to_csv(tmp_path / "s.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert CSV_HEADER[0] == "t" and CSV_HEADER[-1] == "eA" and len(CSV_HEADER) == 35
    assert len(lines) == 1 + len(out)
    assert "-0.0" not in text
    script = gnuplot_script("s.csv", "demo")
    assert "s.csv" in script and script.count("set output") == 3


def test_output_immutable(cruise_model):
    ctrl = BoundedController(np.zeros((4, 17)))
    out = run_closed_loop(cruise_model, ctrl, ReferenceTrajectory([Hold((0, 0, 0), 1.0)]), SimConfig(duration=0.02))
    with pytest.raises(ValueError):
        out.state[0, 0] = 1.0


def test_divergence_reports_step(cruise_model):
    # a destabilizing gain drives the state to overflow
    F = np.zeros((4, 17))
    F[1, 3 + STATE_INDEX["q"]] = 1e6
    x0 = np.zeros(14)
    x0[STATE_INDEX["q"]] = 1.0
    cfg = SimConfig(duration=5.0, initial_state=RigidBodyState.from_array(x0))
    with pytest.raises(IntegrationError) as info:
        run_closed_loop(cruise_model, BoundedController(F, ControlLimits.unbounded()),
                        ReferenceTrajectory([Hold((0, 0, 0), 1.0)]), cfg)
    assert info.value.step is not None and "step" in str(info.value)
