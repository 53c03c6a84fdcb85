"""Linear state-space model of the Yamaha R-50 small-scale helicopter.

The plant is the 13-state rotor/stabilizer-bar model used for hover and cruise
flight, extended by a 14th heading state (``psi_dot = r``) so that heading is
available for the body-to-local-horizon transformation:

    x = [u, v, p, q, phi, theta, a, b, w, r, r_fb, c, d, psi]
    u = [delta_lat, delta_lon, delta_ped, delta_col]

Rotor flapping rows (a, b) are divided through by ``tau_f`` and
stabilizer-bar rows (c, d) by ``tau_s`` so the model reads ``x_dot = A x + B u``.
Units: ft, s, rad.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, NamedTuple

import jsonschema
import numpy as np

from .errors import DimensionError, InputError, MissingFieldError, ValidationError

STATE_LABELS = (
    "u", "v", "p", "q", "phi", "theta", "a", "b",
    "w", "r", "r_fb", "c", "d", "psi",
)
INPUT_LABELS = ("delta_lat", "delta_lon", "delta_ped", "delta_col")

N_STATES = len(STATE_LABELS)
N_INPUTS = len(INPUT_LABELS)

STATE_INDEX = {name: i for i, name in enumerate(STATE_LABELS)}
INPUT_INDEX = {name: i for i, name in enumerate(INPUT_LABELS)}

STANDARD_GRAVITY_FTPS2 = 32.174

DERIVATIVE_KEYS = (
    "X_u", "Y_v", "L_u", "L_v", "M_u", "M_v",
    "X_a", "Y_b", "L_b", "M_a",
    "Z_w", "Z_a", "Z_b", "Z_r",
    "N_v", "N_p", "N_w", "N_r", "N_rfb", "L_w", "M_w",
    "K_r", "K_rfb",
    "A_b", "B_a", "A_c", "B_d",
)
CONTROL_DERIVATIVE_KEYS = (
    "B_lat", "B_lon", "A_lat", "A_lon", "Z_col", "M_col",
    "N_col", "N_ped", "D_lat", "C_lon", "Y_ped",
)
TIME_CONSTANT_KEYS = ("tau_f", "tau_s", "tau_p", "h_cg")
TRIM_KEYS = ("u_0", "v_0", "w_0")


class RigidBodyState(NamedTuple):
    """One plant state sample, in :data:`STATE_LABELS` order."""

    u: float = 0.0
    v: float = 0.0
    p: float = 0.0
    q: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    w: float = 0.0
    r: float = 0.0
    r_fb: float = 0.0
    c: float = 0.0
    d: float = 0.0
    psi: float = 0.0

    @classmethod
    def from_array(cls, x) -> "RigidBodyState":
        x = np.asarray(x, dtype=float)
        if x.shape != (N_STATES,):
            raise DimensionError(f"expected {N_STATES} state entries, got shape {x.shape}")
        return cls(*(float(v) for v in x))


class ControlInput(NamedTuple):
    """Swash-plate and tail-rotor inputs in rad."""

    delta_lat: float = 0.0
    delta_lon: float = 0.0
    delta_ped: float = 0.0
    delta_col: float = 0.0

    @classmethod
    def from_array(cls, u) -> "ControlInput":
        u = np.asarray(u, dtype=float)
        if u.shape != (N_INPUTS,):
            raise DimensionError(f"expected {N_INPUTS} inputs, got shape {u.shape}")
        return cls(*(float(v) for v in u))


@dataclass(frozen=True)
class R50Params:
    """Stability/control derivatives and time constants for one operating point.

    ``tau_p`` and ``h_cg`` are carried for completeness; no model row uses them.
    """

    # speed derivatives
    X_u: float
    Y_v: float
    L_u: float
    L_v: float
    M_u: float
    M_v: float
    # rotor and flapping-spring derivatives
    X_a: float
    Y_b: float
    L_b: float
    M_a: float
    # heave / yaw
    Z_w: float
    Z_a: float
    Z_b: float
    Z_r: float
    N_v: float
    N_p: float
    N_w: float
    N_r: float
    N_rfb: float
    L_w: float
    M_w: float
    # yaw-rate feedback filter
    K_r: float
    K_rfb: float
    # rotor / stabilizer cross coupling
    A_b: float
    B_a: float
    A_c: float
    B_d: float
    # control derivatives
    B_lat: float
    B_lon: float
    A_lat: float
    A_lon: float
    Z_col: float
    M_col: float
    N_col: float
    N_ped: float
    D_lat: float
    C_lon: float
    Y_ped: float
    # time constants (s) and c.g. height (ft)
    tau_f: float
    tau_s: float
    tau_p: float
    h_cg: float
    g: float = STANDARD_GRAVITY_FTPS2
    u_0: float = 0.0
    v_0: float = 0.0
    w_0: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for f in fields(self):
            if f.name == "name":
                continue
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f"{f.name} must be finite, got {value!r}")
        if self.tau_f <= 0:
            raise ValidationError(f"tau_f must be > 0, got {self.tau_f}")
        if self.tau_s <= 0:
            raise ValidationError(f"tau_s must be > 0, got {self.tau_s}")
        if self.g <= 0:
            raise ValidationError(f"g must be > 0, got {self.g}")

    def replace(self, **changes) -> "R50Params":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Dense plant matrices ``A`` (14x14) and ``B`` (14x4)."""

    A: np.ndarray
    B: np.ndarray
    params: R50Params | None = None
    state_labels: tuple[str, ...] = STATE_LABELS
    input_labels: tuple[str, ...] = INPUT_LABELS

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        n = len(self.state_labels)
        m = len(self.input_labels)
        if A.shape != (n, n) or B.shape != (n, m):
            raise DimensionError(f"A must be {n}x{n} and B {n}x{m}; got {A.shape}, {B.shape}")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


_SECTIONS = {
    "derivatives": DERIVATIVE_KEYS,
    "control_derivatives": CONTROL_DERIVATIVE_KEYS,
    "time_constants": TIME_CONSTANT_KEYS,
}


def params_schema() -> dict:
    """The normative JSON schema for parameter documents."""
    text = resources.files("heli_lqr.data").joinpath("params.schema.json").read_text()
    return json.loads(text)


def _raise_schema_error(doc: Mapping[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(params_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    # Missing keys first: they carry the most useful message.
    for err in errors:
        if err.validator == "required" and isinstance(err.instance, Mapping):
            missing = [k for k in err.validator_value if k not in err.instance]
            section = err.absolute_path[-1] if err.absolute_path else None
            raise MissingFieldError(missing[0], section)
    err = errors[0]
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    raise ValidationError(f"{where}: {err.message}")


def params_from_dict(doc: Mapping[str, Any]) -> R50Params:
    """Build :class:`R50Params` from an already-parsed parameter document."""
    if not isinstance(doc, Mapping):
        raise ValidationError("parameter document must be a JSON object")
    _raise_schema_error(doc)
    values: dict[str, Any] = {}
    for section, keys in _SECTIONS.items():
        for key in keys:
            values[key] = doc[section][key]
    values.update(doc.get("trim", {}))
    values.update(doc.get("environment", {}))
    values["name"] = doc.get("name", "")
    return R50Params(**values)


def load_params(source: str | Path | Mapping[str, Any]) -> R50Params:
    """Load a parameter document from a path, a JSON string, or a mapping.

    Raises
    ------
    MissingFieldError
        A required key is absent (the exception names it).
    ValidationError
        A value is non-finite or violates a bound (``tau_f > 0`` etc.).
    InputError
        The document is not valid JSON or the file does not exist.
    """
    if isinstance(source, Mapping):
        return params_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputError(f"cannot read parameter file {path}: {exc.strerror}") from exc
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"parameter document is not valid JSON: {exc}") from exc
    return params_from_dict(doc)


def default_params(operating_point: str = "cruise") -> R50Params:
    """The packaged desk-scale parameter set for ``"cruise"`` or ``"hover"``."""
    if operating_point not in ("cruise", "hover"):
        raise InputError(f"unknown operating point {operating_point!r}")
    text = resources.files("heli_lqr.data").joinpath(f"r50_{operating_point}.json").read_text()
    return load_params(json.loads(text))


def gearing_ratios(params: R50Params) -> tuple[float, float]:
    """Bell-Hiller mixer gearing ``(K_d, K_c) = (B_d / B_lat, A_c / A_lon)``."""
    if params.B_lat == 0:
        raise ZeroDivisionError("K_d = B_d / B_lat is undefined for B_lat = 0")
    if params.A_lon == 0:
        raise ZeroDivisionError("K_c = A_c / A_lon is undefined for A_lon = 0")
    return params.B_d / params.B_lat, params.A_c / params.A_lon


def build_model(params: R50Params) -> StateSpaceModel:
    """Assemble ``A`` and ``B`` for the 14-state plant."""
    if params.tau_f <= 0 or params.tau_s <= 0:
        raise ValidationError("tau_f and tau_s must be positive")
    P = params
    i = STATE_INDEX
    j = INPUT_INDEX
    A = np.zeros((N_STATES, N_STATES))
    B = np.zeros((N_STATES, N_INPUTS))

    A[i["u"], [i["u"], i["theta"], i["a"]]] = [P.X_u, -P.g, P.X_a]

    A[i["v"], [i["v"], i["phi"], i["b"]]] = [P.Y_v, P.g, P.Y_b]
    B[i["v"], j["delta_ped"]] = P.Y_ped

    A[i["p"], [i["u"], i["v"], i["b"], i["w"]]] = [P.L_u, P.L_v, P.L_b, P.L_w]

    A[i["q"], [i["u"], i["v"], i["a"], i["w"]]] = [P.M_u, P.M_v, P.M_a, P.M_w]
    B[i["q"], j["delta_col"]] = P.M_col

    A[i["phi"], i["p"]] = 1.0
    A[i["theta"], i["q"]] = 1.0

    # main rotor flapping, written as tau_f * a_dot = ...
    A[i["a"], [i["q"], i["a"], i["b"], i["c"]]] = [-P.tau_f, -1.0, P.A_b, P.A_c]
    B[i["a"], [j["delta_lat"], j["delta_lon"]]] = [P.A_lat, P.A_lon]
    A[i["b"], [i["p"], i["a"], i["b"], i["d"]]] = [-P.tau_f, P.B_a, -1.0, P.B_d]
    B[i["b"], [j["delta_lat"], j["delta_lon"]]] = [P.B_lat, P.B_lon]
    A[[i["a"], i["b"]]] /= P.tau_f
    B[[i["a"], i["b"]]] /= P.tau_f

    A[i["w"], [i["a"], i["b"], i["w"], i["r"]]] = [P.Z_a, P.Z_b, P.Z_w, P.Z_r]
    B[i["w"], j["delta_col"]] = P.Z_col

    A[i["r"], [i["v"], i["p"], i["w"], i["r"], i["r_fb"]]] = [P.N_v, P.N_p, P.N_w, P.N_r, P.N_rfb]
    B[i["r"], [j["delta_ped"], j["delta_col"]]] = [P.N_ped, P.N_col]

    A[i["r_fb"], [i["r"], i["r_fb"]]] = [P.K_r, P.K_rfb]

    # stabilizer bar, written as tau_s * c_dot = ...
    A[i["c"], [i["q"], i["c"]]] = [-P.tau_s, -1.0]
    B[i["c"], j["delta_lon"]] = P.C_lon
    A[i["d"], [i["p"], i["d"]]] = [-P.tau_s, -1.0]
    B[i["d"], j["delta_lat"]] = P.D_lat
    A[[i["c"], i["d"]]] /= P.tau_s
    B[[i["c"], i["d"]]] /= P.tau_s

    A[i["psi"], i["r"]] = 1.0

    # centrifugal trim couplings; zero in hover and absent from the canonical matrix
    if P.u_0 or P.v_0 or P.w_0:
        A[i["u"], i["q"]] += P.w_0
        A[i["u"], i["r"]] += P.v_0
        A[i["v"], i["r"]] += -P.u_0
        A[i["v"], i["p"]] += P.w_0
        A[i["w"], i["p"]] += -P.v_0
        A[i["w"], i["q"]] += P.u_0

    return StateSpaceModel(A=A, B=B, params=params)


def is_stabilizable(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """PBH test: ``rank [A - lambda I, B] = n`` for every eigenvalue with Re >= 0."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol:
            continue
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        if np.linalg.matrix_rank(M, tol=tol * max(1.0, np.abs(M).max())) < n:
            return False
    return True
