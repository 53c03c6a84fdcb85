"""Command-line front end: ``heli-lqr synthesize|simulate|compare``.

Every run is described by a :class:`RunManifest`. All referenced documents are
read and validated by :func:`resolve` before any numerical work starts.
Exit codes: 0 success, 1 numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .control import BoundedController, ControlLimits
from .errors import DimensionError, HeliLqrError, InputError, NumericalError
from .lqr import CareSolution, RiccatiConfig, gain_dump, read_gain_dump, solve_care
from .metrics import TrackingReport, compare_cases, format_table, tracking_report
from .model import N_STATES, STATE_LABELS, R50Params, RigidBodyState, build_model, default_params, load_params
from .sim import (
    Arc,
    Hold,
    Line,
    ReferenceTrajectory,
    SimConfig,
    SimOutput,
    gnuplot_script,
    make_rect_circle,
    make_rectangle,
    run_closed_loop,
)
from .tracking import N_AUG, TrackingWeights, augment, weights_from_dict

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2

DEFAULT_CORNERS = ((0.0, 0.0, 50.0), (400.0, 0.0, 50.0), (400.0, 200.0, 50.0), (0.0, 200.0, 50.0))
DEFAULT_RECTANGLE = {"kind": "rectangle", "corners": DEFAULT_CORNERS, "speed": 20.0, "hold_time": 5.0}
DEFAULT_RECT_CIRCLE = {**DEFAULT_RECTANGLE, "kind": "rect_circle", "radius": 100.0, "angular_rate": 0.2}

# eta, Q scale, R scale, bounded, default trajectory
CASES: dict[str, tuple[float, float, float, bool, Mapping[str, Any]]] = {
    "case1": (0.01, 0.01, 0.01, False, DEFAULT_RECTANGLE),
    "case2": (0.01, 0.01, 0.01, False, DEFAULT_RECT_CIRCLE),
    "case3": (5.0, 1.0, 1.0, True, DEFAULT_RECTANGLE),
    "case4": (5.0, 1.0, 1.0, True, DEFAULT_RECT_CIRCLE),
}
SCENARIOS = tuple(CASES) + ("custom",)


@dataclass(frozen=True)
class RunManifest:
    """One scenario. Document fields may hold a path or an inline mapping.

    ``None`` means "use the scenario default": the packaged cruise parameters,
    the case weights and trajectory, and bounded control for Cases 3/4.
    """

    scenario: str = "custom"
    params: str | Mapping[str, Any] | None = None
    weights: str | Mapping[str, Any] | None = None
    trajectory: str | Mapping[str, Any] | None = None
    bounded: bool | None = None
    limits: str | Mapping[str, Any] | None = None
    gains: str | None = None
    sim: Mapping[str, Any] = field(default_factory=dict)
    out: str | None = None
    label: str | None = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base_dir: Path | None = None) -> "RunManifest":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
        doc = dict(doc)
        if base_dir is not None:
            # relative paths inside a manifest are relative to the manifest itself
            for key in ("params", "weights", "trajectory", "limits", "gains"):
                if isinstance(doc.get(key), str) and not Path(doc[key]).is_absolute():
                    doc[key] = str(base_dir / doc[key])
        if "bounded" in doc and doc["bounded"] is not None and not isinstance(doc["bounded"], bool):
            raise InputError("manifest 'bounded' must be true or false")
        if not isinstance(doc.get("sim", {}), Mapping):
            raise InputError("manifest 'sim' must be an object")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        return cls.from_dict(_read_json(path, "manifest"), base_dir=path.parent)


@dataclass(frozen=True, eq=False)
class ResolvedRun:
    label: str
    manifest: RunManifest
    params: R50Params
    weights: TrackingWeights
    trajectory: ReferenceTrajectory
    trajectory_doc: Mapping[str, Any]
    limits: ControlLimits
    bounded: bool
    sim: SimConfig
    gains: CareSolution | None


@dataclass(frozen=True, eq=False)
class RunResult:
    run: ResolvedRun
    solution: CareSolution
    output: SimOutput
    report: TrackingReport


# --------------------------------------------------------------------------- resolution


def _read_json(path: str | Path, what: str) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from exc


def _document(value: str | Mapping[str, Any], what: str) -> Mapping[str, Any]:
    doc = _read_json(value, what) if isinstance(value, str) else value
    if not isinstance(doc, Mapping):
        raise InputError(f"{what} document must be a JSON object")
    return doc


def _vec3(value, what: str) -> tuple[float, float, float]:
    try:
        v = tuple(float(x) for x in value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what} must be a list of 3 numbers") from exc
    if len(v) != 3 or not all(math.isfinite(x) for x in v):
        raise InputError(f"{what} must be a list of 3 finite numbers")
    return v


def _segment(doc: Mapping[str, Any]):
    kind = doc.get("type")
    try:
        if kind == "hold":
            return Hold(_vec3(doc["point"], "hold point"), float(doc["duration"]))
        if kind == "line":
            return Line(_vec3(doc["to"], "line end"), float(doc["speed"]))
        if kind == "arc":
            start = doc.get("start_angle")
            return Arc(_vec3(doc["center"], "arc center"), float(doc["radius"]), float(doc["angular_rate"]),
                       float(doc["sweep"]), None if start is None else float(start))
    except KeyError as exc:
        raise InputError(f"{kind} segment is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed {kind} segment: {exc}") from exc
    raise InputError(f"unknown segment type {kind!r}; expected hold, line or arc")


def trajectory_from_dict(doc: Mapping[str, Any]) -> ReferenceTrajectory:
    """Build a reference from ``{"kind": "rectangle" | "rect_circle" | "segments", ...}``."""
    kind = doc.get("kind")
    try:
        if kind in ("rectangle", "rect_circle"):
            corners = [_vec3(c, "corner") for c in doc["corners"]]
            speed = float(doc.get("speed", 20.0))
            hold = float(doc.get("hold_time", 5.0))
            if kind == "rectangle":
                return make_rectangle(corners, speed, hold)
            center = doc.get("center")
            return make_rect_circle(
                corners, speed, hold,
                radius=float(doc.get("radius", 100.0)),
                angular_rate=float(doc.get("angular_rate", 0.2)),
                center=None if center is None else _vec3(center, "circle center"),
                sweep=float(doc.get("sweep", 2 * math.pi)),
            )
        if kind == "segments":
            segs = [_segment(s) for s in doc["segments"]]
            start = doc.get("start")
            return ReferenceTrajectory(segs, start=None if start is None else _vec3(start, "start"))
    except KeyError as exc:
        raise InputError(f"trajectory is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed trajectory: {exc}") from exc
    raise InputError(f"unknown trajectory kind {kind!r}; expected rectangle, rect_circle or segments")


def _initial_state(value) -> RigidBodyState:
    if value is None:
        return RigidBodyState()
    if isinstance(value, Mapping):
        unknown = set(value) - set(STATE_LABELS)
        if unknown:
            raise InputError(f"unknown state names: {', '.join(sorted(unknown))}")
        x = np.zeros(N_STATES)
        for k, v in value.items():
            x[STATE_LABELS.index(k)] = float(v)
    else:
        x = np.asarray(value, dtype=float)
        if x.shape != (N_STATES,):
            raise DimensionError(f"initial_state needs {N_STATES} entries, got {x.shape}")
    return RigidBodyState.from_array(x)


def _sim_config(doc: Mapping[str, Any], ref: ReferenceTrajectory) -> SimConfig:
    unknown = set(doc) - {"dt", "duration", "initial_position", "initial_state"}
    if unknown:
        raise InputError(f"unknown sim keys: {', '.join(sorted(unknown))}")
    pos = doc.get("initial_position")
    try:
        return SimConfig(
            dt=float(doc.get("dt", SimConfig.dt)),
            duration=float(doc["duration"]) if doc.get("duration") is not None else ref.duration,
            initial_state=_initial_state(doc.get("initial_state")),
            # by default the vehicle starts where the reference starts
            initial_position=_vec3(pos, "initial_position") if pos is not None else tuple(ref.position_at(0.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed sim settings: {exc}") from exc


def resolve(manifest: RunManifest) -> ResolvedRun:
    """Read and validate every document a manifest refers to."""
    if manifest.scenario not in SCENARIOS:
        raise InputError(f"unknown scenario {manifest.scenario!r}; expected one of {', '.join(SCENARIOS)}")
    case = CASES.get(manifest.scenario)

    params = default_params("cruise") if manifest.params is None else load_params(
        manifest.params if isinstance(manifest.params, Mapping) else Path(manifest.params))

    if manifest.weights is not None:
        weights = weights_from_dict(_document(manifest.weights, "weights"))
    elif case is not None:
        weights = TrackingWeights.scaled(*case[:3])
    else:
        raise InputError("a custom scenario needs a weights document")

    if manifest.trajectory is not None:
        traj_doc = _document(manifest.trajectory, "trajectory")
    else:
        traj_doc = case[4] if case is not None else DEFAULT_RECTANGLE
    trajectory = trajectory_from_dict(traj_doc)

    bounded = manifest.bounded if manifest.bounded is not None else (case[3] if case is not None else True)
    if bounded:
        limits = ControlLimits.default() if manifest.limits is None else ControlLimits.from_dict(
            _document(manifest.limits, "limits"))
    else:
        limits = ControlLimits.unbounded()

    gains = None
    if manifest.gains is not None:
        gains = read_gain_dump(manifest.gains)
        if gains.F.shape != (4, N_AUG):
            raise DimensionError(f"gain file {manifest.gains} holds a {gains.F.shape} gain, expected (4, {N_AUG})")

    return ResolvedRun(
        label=manifest.label or manifest.scenario,
        manifest=manifest,
        params=params,
        weights=weights,
        trajectory=trajectory,
        trajectory_doc=traj_doc,
        limits=limits,
        bounded=bool(bounded),
        sim=_sim_config(manifest.sim, trajectory),
        gains=gains,
    )


# --------------------------------------------------------------------------- execution


def synthesize(run: ResolvedRun, cfg: RiccatiConfig | None = None) -> CareSolution:
    am = augment(build_model(run.params), run.weights)
    return solve_care(am.A_aug, am.B_aug, am.weights.Q, am.weights.R, cfg)


def simulate(run: ResolvedRun, solution: CareSolution | None = None) -> RunResult:
    solution = solution or run.gains or synthesize(run)
    ctrl = BoundedController(solution.F, run.limits, R=run.weights.R)
    out = run_closed_loop(build_model(run.params), ctrl, run.trajectory, run.sim, eta=run.weights.eta)
    summary = {**run.weights.summary(), "bounded": run.bounded}
    return RunResult(run=run, solution=solution, output=out, report=tracking_report(out, run.label, summary))


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _resolved_manifest(run: ResolvedRun) -> dict[str, Any]:
    """The fully expanded inputs of a run, written next to its outputs."""
    s = run.sim
    return {
        "scenario": run.manifest.scenario,
        "label": run.label,
        "params": asdict(run.params),
        "weights": {"eta": run.weights.eta, "Q": run.weights.Q.tolist(), "R": run.weights.R.tolist()},
        "trajectory": json.loads(json.dumps(run.trajectory_doc)),
        "bounded": run.bounded,
        "limits_rad": {"lower": run.limits.lower.tolist(), "upper": run.limits.upper.tolist()},
        "sim": {"dt": s.dt, "duration": s.duration, "initial_position": list(s.initial_position),
                "initial_state": list(s.initial_state)},
    }


def write_outputs(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "gains.json").write_text(_json(gain_dump(result.solution)))
    result.output.to_csv(out_dir / "sim.csv")
    (out_dir / "plot.gp").write_text(gnuplot_script("sim.csv", result.run.label))
    (out_dir / "report.txt").write_text(format_table([result.report]))
    (out_dir / "report.json").write_text(_json(result.report.to_dict()))
    (out_dir / "manifest.json").write_text(_json(_resolved_manifest(result.run)))


def _print_solution(sol: CareSolution, label: str) -> None:
    print(f"{label}: residual {sol.residual_norm:.3e}, spectral abscissa {sol.spectral_abscissa:.6g}")


def _saturation_summary(out: SimOutput) -> str:
    frac = out.saturated.mean(axis=0)
    return ", ".join(f"{name} {100 * f:.1f}%" for name, f in zip(("lat", "lon", "ped", "col"), frac))


# --------------------------------------------------------------------------- argument handling


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key in ("params", "weights", "trajectory", "bounded", "limits"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    sim = {k: getattr(args, k) for k in ("dt", "duration") if getattr(args, k, None) is not None}
    if sim:
        out["sim"] = sim
    return out


def _apply(manifest: RunManifest, overrides: Mapping[str, Any], **extra) -> RunManifest:
    changes = dict(overrides)
    if "sim" in changes:
        changes["sim"] = {**manifest.sim, **changes["sim"]}
    changes.update({k: v for k, v in extra.items() if v is not None})
    return replace(manifest, **changes)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heli-lqr", description="LQR tracking control of the Yamaha R-50 linear model.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, many: bool) -> None:
        p.add_argument("--params", help="parameter JSON (default: packaged cruise set)")
        p.add_argument("--weights", help="weights JSON with eta and Q/q_scale, R/r_scale")
        p.add_argument("--trajectory", help="trajectory JSON (rectangle, rect_circle or segments)")
        p.add_argument("--limits", help="control limits JSON, per channel lower_deg/upper_deg")
        p.add_argument("--bounded", type=_bool, metavar="BOOL", help="clamp inputs to the limits")
        p.add_argument("--dt", type=float, help="simulation step, s")
        p.add_argument("--duration", type=float, help="simulated time, s (default: trajectory length)")
        p.add_argument("--out", help="output directory")
        if many:
            p.add_argument("--case", action="append", choices=SCENARIOS, help="scenario; give twice")
            p.add_argument("--manifest", action="append", help="run manifest JSON; may be repeated")
        else:
            p.add_argument("--case", choices=SCENARIOS, help="scenario name")
            p.add_argument("--manifest", help="run manifest JSON")

    p_syn = sub.add_parser("synthesize", help="solve the Riccati equation and write the gain dump")
    common(p_syn, many=False)
    p_syn.add_argument("--gains", help="output gain file (default: <out>/gains.json)")

    p_sim = sub.add_parser("simulate", help="simulate one scenario and write CSV, plot script and report")
    common(p_sim, many=False)
    p_sim.add_argument("--gains", help="reuse a gain dump instead of synthesizing")

    p_cmp = sub.add_parser("compare", help="simulate two scenarios and tabulate their MSE")
    common(p_cmp, many=True)
    return parser


def _single_manifest(args: argparse.Namespace) -> RunManifest:
    base = RunManifest.load(args.manifest) if args.manifest else RunManifest()
    return _apply(base, _overrides(args), scenario=args.case)


def _cmd_synthesize(args: argparse.Namespace) -> int:
    manifest = _single_manifest(args)
    run = resolve(manifest)
    sol = synthesize(run)
    if args.gains:
        target = Path(args.gains)
    else:
        target = Path(args.out or manifest.out or ".") / "gains.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(_json(gain_dump(sol)))
    _print_solution(sol, run.label)
    print(f"wrote {target}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    manifest = _apply(_single_manifest(args), {}, gains=args.gains)
    run = resolve(manifest)
    out_dir = Path(args.out or manifest.out or f"out/{run.label}")
    result = simulate(run)
    write_outputs(result, out_dir)
    _print_solution(result.solution, run.label)
    print(f"saturation: {_saturation_summary(result.output)}")
    print(format_table([result.report]), end="")
    print(f"wrote {out_dir}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    overrides = _overrides(args)
    manifests = [_apply(RunManifest.load(p), overrides) for p in args.manifest or []]
    manifests += [_apply(RunManifest(), overrides, scenario=c) for c in args.case or []]
    if len(manifests) != 2:
        raise InputError(f"compare needs exactly two scenarios, got {len(manifests)}")
    runs = [resolve(m) for m in manifests]
    out_dir = Path(args.out or "out/compare")
    names = [r.label for r in runs]
    if names[0] == names[1]:
        names = [f"{names[0]}-a", f"{names[1]}-b"]
    results = []
    for run, name in zip(runs, names):
        res = simulate(run)
        write_outputs(res, out_dir / name)
        _print_solution(res.solution, run.label)
        results.append(res)
    cmp = compare_cases(results[0].report, results[1].report)
    (out_dir / "comparison.txt").write_text(cmp.table())
    (out_dir / "comparison.json").write_text(cmp.to_json())
    print(cmp.table(), end="")
    print(f"wrote {out_dir}")
    return EXIT_OK


COMMANDS = {"synthesize": _cmd_synthesize, "simulate": _cmd_simulate, "compare": _cmd_compare}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"heli-lqr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"heli-lqr: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HeliLqrError as exc:
        print(f"heli-lqr: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
