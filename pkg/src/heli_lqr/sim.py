"""Reference trajectories and closed-loop simulation.

Positions are reported in the local-horizon frame as North, East, Altitude
(ft, altitude positive up). Internally the kinematics integrate the
North-East-Down position, because body ``w`` is positive down and the
tracking-error states were designed against ``e_dot = -eta [u, v, w]``; the
controller therefore sees ``[e_N, e_E, -e_A]``.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .control import BoundedController
from .errors import DimensionError, InputError, IntegrationError, ValidationError
from .model import N_INPUTS, N_STATES, STATE_INDEX, RigidBodyState, StateSpaceModel
from .tracking import N_AUG, N_ERROR

_U, _V, _W = STATE_INDEX["u"], STATE_INDEX["v"], STATE_INDEX["w"]
_PHI, _THETA, _PSI = STATE_INDEX["phi"], STATE_INDEX["theta"], STATE_INDEX["psi"]

CSV_HEADER = (
    "t,u,v,p,q,phi,theta,a,b,w,r,rfb,c,d,psi,"
    "dlat_raw,dlon_raw,dped_raw,dcol_raw,dlat,dlon,dped,dcol,"
    "Vx,Vy,Vz,N,E,A,Nref,Eref,Aref,eN,eE,eA"
).split(",")


# --------------------------------------------------------------------------- frames


def dcm_body_from_inertial(phi: float, theta: float, psi: float) -> np.ndarray:
    """Euler 3-2-1 direction cosine matrix taking inertial vectors to body axes."""
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [ct * cp, ct * sp, -st],
        [sf * st * cp - cf * sp, sf * st * sp + cf * cp, sf * ct],
        [cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct],
    ])


def body_to_local_horizon(vec_body, phi: float, theta: float, psi: float) -> np.ndarray:
    """Rotate a body-axis vector into the local-horizon (North, East, Down) axes."""
    return dcm_body_from_inertial(phi, theta, psi).T @ np.asarray(vec_body, dtype=float)


# --------------------------------------------------------------------------- references


def _point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise InputError(f"expected a finite (N, E, A) point, got {p!r}")
    return p


@dataclass(frozen=True)
class Hold:
    point: tuple[float, float, float]
    duration: float


@dataclass(frozen=True)
class Line:
    to: tuple[float, float, float]
    speed: float


@dataclass(frozen=True)
class Arc:
    """Horizontal circular arc; the angle is measured from North toward East."""

    center: tuple[float, float, float]
    radius: float
    angular_rate: float
    sweep: float
    start_angle: float | None = None


Segment = Hold | Line | Arc


class _Piece:
    """A segment resolved against its start time and start point."""

    def __init__(self, seg: Segment, t0: float, start: np.ndarray):
        self.seg = seg
        self.t0 = t0
        if isinstance(seg, Hold):
            if seg.duration < 0:
                raise ValidationError("hold duration must be >= 0")
            self.start = self.end = _point(seg.point)
            self.duration = float(seg.duration)
        elif isinstance(seg, Line):
            if not seg.speed > 0:
                raise ValidationError("line speed must be > 0")
            self.start = start
            self.end = _point(seg.to)
            self.duration = float(np.linalg.norm(self.end - start)) / seg.speed
        elif isinstance(seg, Arc):
            if not seg.radius > 0:
                raise ValidationError("arc radius must be > 0")
            if seg.angular_rate == 0 or seg.sweep <= 0:
                raise ValidationError("arc needs a nonzero angular_rate and a positive sweep")
            self.center = _point(seg.center)
            if seg.start_angle is None:
                rel = start - self.center
                if abs(math.hypot(rel[0], rel[1]) - seg.radius) > 1e-6 * max(1.0, seg.radius) or abs(rel[2]) > 1e-9:
                    raise ValidationError("arc must start on its circle at the center's altitude")
                self.theta0 = math.atan2(rel[1], rel[0])
            else:
                self.theta0 = float(seg.start_angle)
            self.duration = seg.sweep / abs(seg.angular_rate)
            self.start = self._arc(0.0)
            self.end = self._arc(self.duration)
        else:
            raise InputError(f"unknown segment {seg!r}")

    def _arc(self, tau: float) -> np.ndarray:
        seg = self.seg
        ang = self.theta0 + seg.angular_rate * tau
        return self.center + np.array([seg.radius * math.cos(ang), seg.radius * math.sin(ang), 0.0])

    def at(self, t: float) -> np.ndarray:
        tau = min(max(t - self.t0, 0.0), self.duration)
        if isinstance(self.seg, Hold):
            return self.start.copy()
        if isinstance(self.seg, Line):
            if self.duration == 0:
                return self.end.copy()
            return self.start + (tau / self.duration) * (self.end - self.start)
        return self._arc(tau)


class ReferenceTrajectory:
    """Piecewise path of hold, straight-line and circular-arc segments.

    Before the first segment and after the last one the reference holds the
    nearest endpoint.
    """

    def __init__(self, segments: Sequence[Segment], start=None):
        if not segments:
            raise ValidationError("a trajectory needs at least one segment")
        self.segments = tuple(segments)
        first = segments[0]
        if start is not None:
            cursor = _point(start)
        elif isinstance(first, Hold):
            cursor = _point(first.point)
        elif isinstance(first, Arc) and first.start_angle is not None:
            cursor = None
        else:
            raise ValidationError("a trajectory starting with a line needs an explicit start point")
        t = 0.0
        self._pieces: list[_Piece] = []
        for seg in segments:
            piece = _Piece(seg, t, cursor)
            self._pieces.append(piece)
            cursor = piece.end
            t += piece.duration
        self._t0 = [p.t0 for p in self._pieces]
        self.duration = t

    def position_at(self, t: float) -> np.ndarray:
        k = bisect.bisect_right(self._t0, t) - 1
        return self._pieces[max(k, 0)].at(t)

    def positions(self, times) -> np.ndarray:
        return np.array([self.position_at(float(t)) for t in times])

    @property
    def end(self) -> np.ndarray:
        return self._pieces[-1].end.copy()


def rectangle_segments(corners, speed: float, hold_time: float) -> list[Segment]:
    pts = [_point(c) for c in corners]
    if len(pts) != 4:
        raise ValidationError("a rectangle needs exactly 4 corners")
    for i in range(4):
        for j in range(i + 1, 4):
            if np.array_equal(pts[i], pts[j]):
                raise ValidationError(f"degenerate rectangle: corners {i} and {j} coincide")
    if not speed > 0:
        raise ValidationError("speed must be > 0")
    if hold_time < 0:
        raise ValidationError("hold_time must be >= 0")
    segs: list[Segment] = []
    for i in range(4):
        segs.append(Hold(tuple(pts[i]), hold_time))
        segs.append(Line(tuple(pts[(i + 1) % 4]), speed))
    return segs


def make_rectangle(corners, speed: float = 20.0, hold_time: float = 5.0) -> ReferenceTrajectory:
    """Closed circuit through four corners, pausing ``hold_time`` at each."""
    return ReferenceTrajectory(rectangle_segments(corners, speed, hold_time))


def make_rect_circle(corners, speed: float = 20.0, hold_time: float = 5.0,
                     radius: float = 100.0, angular_rate: float = 0.2,
                     center=None, sweep: float = 2 * math.pi) -> ReferenceTrajectory:
    """Rectangle followed by a full circle tangent to its closing leg.

    Without an explicit ``center`` the circle is placed so the path leaves the
    last corner with the closing leg's heading; ``angular_rate > 0`` turns
    from North toward East.
    """
    segs = rectangle_segments(corners, speed, hold_time)
    if not radius > 0:
        raise ValidationError("radius must be > 0")
    p_end = _point(corners[0])
    if center is None:
        d = p_end - _point(corners[3])
        d_h = d[:2] / np.linalg.norm(d[:2])
        s = math.copysign(1.0, angular_rate)
        r0 = np.array([s * d_h[1], -s * d_h[0], 0.0])
        center = p_end - radius * r0
    segs.append(Arc(tuple(_point(center)), radius, angular_rate, sweep))
    return ReferenceTrajectory(segs)


# --------------------------------------------------------------------------- integration


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], x, t: float, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``x_dot = f(t, x)``."""
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    if not (np.all(np.isfinite(k1)) and np.all(np.isfinite(k2))
            and np.all(np.isfinite(k3)) and np.all(np.isfinite(k4))):
        raise IntegrationError("non-finite derivative in RK4 step")
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise IntegrationError("RK4 step overflowed")
    return x_next


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005
    duration: float = 60.0
    initial_state: RigidBodyState = field(default_factory=RigidBodyState)
    initial_position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not self.duration >= self.dt:
            raise ValidationError("duration must be at least one step")
        if len(self.initial_state) != N_STATES:
            raise DimensionError(f"initial_state needs {N_STATES} entries")
        if len(self.initial_position) != 3:
            raise DimensionError("initial_position needs 3 entries")

    @property
    def n_records(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1


@dataclass(frozen=True, eq=False)
class SimOutput:
    """Per-step history. Row ``k`` is the sample at ``t[k]``.

    ``velocity`` holds (V_x, V_y, V_z) with V_z the climb rate, ``position``
    (N, E, A). ``error`` is ``reference - position``.
    """

    t: np.ndarray
    state: np.ndarray
    u_raw: np.ndarray
    u: np.ndarray
    saturated: np.ndarray
    velocity: np.ndarray
    position: np.ndarray
    reference: np.ndarray
    error: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.t)

    def rows(self) -> np.ndarray:
        return np.column_stack([
            self.t, self.state, self.u_raw, self.u,
            self.velocity, self.position, self.reference, self.error,
        ])

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows():
            writer.writerow([repr(float(v) + 0.0) for v in row])  # + 0.0 folds -0.0 into 0.0
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _check_dims(model: StateSpaceModel, ctrl: BoundedController):
    if model.n_states != N_STATES or model.n_inputs != N_INPUTS:
        raise DimensionError(f"plant must be {N_STATES}x{N_INPUTS}")
    if ctrl.n_states != N_AUG:
        raise DimensionError(f"controller gain must act on {N_AUG} augmented states, got {ctrl.n_states}")


def run_closed_loop(model: StateSpaceModel, ctrl: BoundedController,
                    ref: ReferenceTrajectory, cfg: SimConfig, eta: float = 1.0) -> SimOutput:
    """Simulate the plant under the bounded tracking controller.

    Each step measures the position error against ``ref``, evaluates the
    control, then advances plant and position together with RK4 holding the
    control constant across the step.
    """
    _check_dims(model, ctrl)
    if model.params is not None and cfg.dt > model.params.tau_f / 5:
        raise ValidationError(
            f"dt = {cfg.dt} s does not resolve the rotor mode (need dt <= tau_f/5 = {model.params.tau_f / 5:.4g} s)"
        )
    A, B = model.A, model.B
    n = cfg.n_records
    dt = cfg.dt

    t_hist = np.arange(n) * dt
    x_hist = np.empty((n, N_STATES))
    u_raw_hist = np.empty((n, N_INPUTS))
    u_hist = np.empty((n, N_INPUTS))
    vel_hist = np.empty((n, 3))
    pos_hist = np.empty((n, 3))
    ref_hist = np.empty((n, 3))

    p0 = np.asarray(cfg.initial_position, dtype=float)
    z = np.concatenate([np.asarray(cfg.initial_state, dtype=float), [p0[0], p0[1], -p0[2]]])
    x_aug = np.empty(N_AUG)

    def deriv(_t, z, u):
        x = z[:N_STATES]
        out = np.empty_like(z)
        out[:N_STATES] = A @ x + B @ u
        out[N_STATES:] = body_to_local_horizon(x[[_U, _V, _W]], x[_PHI], x[_THETA], x[_PSI])
        return out

    for k in range(n):
        x = z[:N_STATES]
        ned = z[N_STATES:]
        r_nea = ref.position_at(t_hist[k])
        x_aug[0] = eta * (r_nea[0] - ned[0])
        x_aug[1] = eta * (r_nea[1] - ned[1])
        x_aug[2] = eta * (-r_nea[2] - ned[2])
        x_aug[N_ERROR:] = x
        u_raw = ctrl.raw(x_aug)
        u = ctrl.saturate(u_raw)
        v_ned = body_to_local_horizon(x[[_U, _V, _W]], x[_PHI], x[_THETA], x[_PSI])

        x_hist[k] = x
        u_raw_hist[k] = u_raw
        u_hist[k] = u
        vel_hist[k] = (v_ned[0], v_ned[1], -v_ned[2])
        pos_hist[k] = (ned[0], ned[1], -ned[2])
        ref_hist[k] = r_nea

        if k == n - 1:
            break
        try:
            z = rk4_step(lambda t, zz: deriv(t, zz, u), z, t_hist[k], dt)
        except IntegrationError as exc:
            raise IntegrationError(f"simulation diverged at step {k}", step=k) from exc
        if not np.all(np.isfinite(z)):
            raise IntegrationError(f"simulation diverged at step {k + 1}", step=k + 1)

    return SimOutput(
        t=t_hist,
        state=x_hist,
        u_raw=u_raw_hist,
        u=u_hist,
        saturated=u_hist != u_raw_hist,
        velocity=vel_hist,
        position=pos_hist,
        reference=ref_hist,
        error=ref_hist - pos_hist,
    )


# --------------------------------------------------------------------------- plotting


def gnuplot_script(csv_name: str, title: str = "") -> str:
    """Gnuplot script drawing trajectory, velocity and control panels from the CSV."""
    col = {name: i + 1 for i, name in enumerate(CSV_HEADER)}
    stem = Path(csv_name).stem
    tag = f" ({title})" if title else ""

    def c(name):
        return f"{col[name]}"

    def deg(name):
        return f"(${col[name]}*180/pi)"

    src = f"< tail -n +2 '{csv_name}'"
    lines = [
        "# generated by heli-lqr; run with: gnuplot <this file>",
        "set datafile separator ','",
        "set terminal pngcairo size 1200,900",
        "set grid",
        "",
        f"set output '{stem}_trajectory.png'",
        "set multiplot layout 2,2 title 'Trajectory tracking" + tag + "'",
        "set xlabel 'E (ft)'; set ylabel 'N (ft)'",
        f"plot \"{src}\" using {c('Eref')}:{c('Nref')} with lines dt 2 title 'reference', \\",
        f"     '' using {c('E')}:{c('N')} with lines title 'actual'",
        "set xlabel 't (s)'; set ylabel 'N (ft)'",
        f"plot \"{src}\" using 1:{c('Nref')} with lines dt 2 title 'N ref', '' using 1:{c('N')} with lines title 'N'",
        "set ylabel 'E (ft)'",
        f"plot \"{src}\" using 1:{c('Eref')} with lines dt 2 title 'E ref', '' using 1:{c('E')} with lines title 'E'",
        "set ylabel 'A (ft)'",
        f"plot \"{src}\" using 1:{c('Aref')} with lines dt 2 title 'A ref', '' using 1:{c('A')} with lines title 'A'",
        "unset multiplot",
        "",
        f"set output '{stem}_velocity.png'",
        "set multiplot layout 3,1 title 'Velocity tracking" + tag + "'",
        "set xlabel 't (s)'",
    ]
    for name in ("Vx", "Vy", "Vz"):
        lines += [
            f"set ylabel '{name} (ft/s)'",
            f"plot \"{src}\" using 1:{c(name)} with lines title '{name}'",
        ]
    lines += [
        "unset multiplot",
        "",
        f"set output '{stem}_controls.png'",
        "set multiplot layout 2,2 title 'Control inputs" + tag + "'",
        "set xlabel 't (s)'",
    ]
    for name in ("dlat", "dlon", "dped", "dcol"):
        lines += [
            f"set ylabel '{name} (deg)'",
            f"plot \"{src}\" using 1:{deg(name + '_raw')} with lines dt 2 title '{name} unsaturated', \\",
            f"     '' using 1:{deg(name)} with lines title '{name}'",
        ]
    lines += ["unset multiplot", ""]
    return "\n".join(lines)
