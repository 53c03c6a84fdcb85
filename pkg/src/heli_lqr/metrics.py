"""Mean-square tracking errors and case comparison tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DimensionError, InputError, ValidationError
from .sim import SimOutput

CHANNELS = ("Vx", "Vy", "Vz", "N", "E", "A")
UNITS = {"Vx": "ft^2/s^2", "Vy": "ft^2/s^2", "Vz": "ft^2/s^2", "N": "ft^2", "E": "ft^2", "A": "ft^2"}
# stands in for a ratio whose denominator MSE is exactly zero
ZERO_DENOMINATOR = "zero-denominator"


def mse(actual, reference) -> float:
    """Mean of squared pointwise differences."""
    a = np.asarray(actual, dtype=float)
    r = np.asarray(reference, dtype=float)
    if a.shape != r.shape:
        raise DimensionError(f"series lengths differ: {a.shape} vs {r.shape}")
    if a.size == 0:
        raise DimensionError("mse needs at least one sample")
    d = a - r
    return float(np.mean(d * d))


def reference_velocity(out: SimOutput) -> np.ndarray:
    """Reference (V_x, V_y, V_z) by finite differences of the sampled reference position."""
    if len(out) < 2:
        return np.zeros_like(out.reference)
    return np.gradient(out.reference, out.t, axis=0)


@dataclass(frozen=True)
class TrackingReport:
    label: str
    mse: dict[str, float]
    weights: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for ch, v in self.mse.items():
            if not (v >= 0):
                raise ValidationError(f"MSE for {ch} must be >= 0, got {v}")

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(self.mse)

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "mse": dict(self.mse), "units": {c: UNITS.get(c, "") for c in self.mse},
                "weights": dict(self.weights)}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "TrackingReport":
        try:
            return cls(label=str(doc["label"]), mse={k: float(v) for k, v in doc["mse"].items()},
                       weights=dict(doc.get("weights", {})))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise InputError(f"malformed tracking report: {exc}") from exc


def tracking_report(out: SimOutput, label: str, weights: Mapping[str, Any] | None = None) -> TrackingReport:
    """Per-channel MSE of a simulation, in the column order of :data:`CHANNELS`."""
    v_ref = reference_velocity(out)
    values = [mse(out.velocity[:, i], v_ref[:, i]) for i in range(3)]
    values += [mse(out.position[:, i], out.reference[:, i]) for i in range(3)]
    return TrackingReport(label=label, mse=dict(zip(CHANNELS, values)), weights=dict(weights or {}))


def _ratio(num: float, den: float) -> float | str:
    if den == 0.0:
        return ZERO_DENOMINATOR
    return num / den


@dataclass(frozen=True)
class Comparison:
    a: TrackingReport
    b: TrackingReport
    ratios: dict[str, float | str]

    def table(self) -> str:
        return format_table([self.a, self.b], self.ratios)

    def to_dict(self) -> dict[str, Any]:
        return {"a": self.a.to_dict(), "b": self.b.to_dict(), "ratio_b_over_a": dict(self.ratios)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def compare_cases(report_a: TrackingReport, report_b: TrackingReport) -> Comparison:
    """Side-by-side MSE of two runs and the per-channel ratio b/a."""
    if report_a.channels != report_b.channels:
        raise InputError(f"channel sets differ: {report_a.channels} vs {report_b.channels}")
    ratios = {ch: _ratio(report_b.mse[ch], report_a.mse[ch]) for ch in report_a.channels}
    return Comparison(a=report_a, b=report_b, ratios=ratios)


def _fmt(v: float | str) -> str:
    if isinstance(v, str):
        return v
    if v == 0.0 or (1e-3 <= abs(v) < 1e6):
        return f"{v:.4g}"
    return f"{v:.3e}" if math.isfinite(v) else str(v)


def format_table(reports: list[TrackingReport], ratios: Mapping[str, float | str] | None = None) -> str:
    """Plain-text table with one row per report, velocity channels first."""
    if not reports:
        raise InputError("nothing to tabulate")
    channels = reports[0].channels
    label_w = max(12, *(len(r.label) for r in reports))
    col_w = 18
    head = "case".ljust(label_w) + "".join(ch.rjust(col_w) for ch in channels)
    units = "".ljust(label_w) + "".join(f"({UNITS.get(ch, '')})".rjust(col_w) for ch in channels)
    lines = ["Tracking error (MSE)", head, units, "-" * len(head)]
    for r in reports:
        if r.channels != channels:
            raise InputError(f"channel sets differ: {channels} vs {r.channels}")
        lines.append(r.label.ljust(label_w) + "".join(_fmt(r.mse[ch]).rjust(col_w) for ch in channels))
    if ratios is not None:
        name = f"{reports[-1].label}/{reports[0].label}"
        lines.append(name.ljust(label_w) + "".join(_fmt(ratios[ch]).rjust(col_w) for ch in channels))
    return "\n".join(lines) + "\n"
