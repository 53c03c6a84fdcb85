"""Bounded state-feedback control.

With a diagonal input weight the pointwise minimization of the Hamiltonian
decouples per channel into ``min 0.5 R_ii u^2 + (p^T b_i) u`` over
``[lower_i, upper_i]``. Its solution is the unconstrained minimizer clipped to
the interval, which is what :func:`bounded_control` returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DimensionError, InputError, ValidationError
from .model import INPUT_LABELS, N_INPUTS, ControlInput

# hard limits of the R-50 controls, degrees (lat, lon, ped, col)
DEFAULT_LIMITS_DEG = {
    "lat": (-5.0, 5.0),
    "lon": (-5.0, 5.0),
    "ped": (-22.0, 22.0),
    "col": (-10.0, 10.0),
}
CHANNELS = ("lat", "lon", "ped", "col")


@dataclass(frozen=True, eq=False)
class ControlLimits:
    """Signed per-channel bounds in rad, ordered as :data:`INPUT_LABELS`."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != (N_INPUTS,) or hi.shape != (N_INPUTS,):
            raise DimensionError(f"limits need {N_INPUTS} entries each")
        if not np.all(lo < hi):
            bad = [INPUT_LABELS[i] for i in np.flatnonzero(~(lo < hi))]
            raise ValidationError(f"lower bound must be below upper bound for {', '.join(bad)}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_degrees(cls, limits_deg: Mapping[str, tuple[float, float]]) -> "ControlLimits":
        lo = [math.radians(limits_deg[ch][0]) for ch in CHANNELS]
        hi = [math.radians(limits_deg[ch][1]) for ch in CHANNELS]
        return cls(lower=np.array(lo), upper=np.array(hi))

    @classmethod
    def default(cls) -> "ControlLimits":
        return cls.from_degrees(DEFAULT_LIMITS_DEG)

    @classmethod
    def unbounded(cls) -> "ControlLimits":
        return cls(lower=np.full(N_INPUTS, -np.inf), upper=np.full(N_INPUTS, np.inf))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ControlLimits":
        """Parse ``{"lat": {"lower_deg": -5, "upper_deg": 5}, ...}``; absent channels keep defaults."""
        merged = dict(DEFAULT_LIMITS_DEG)
        for ch, spec in doc.items():
            if ch not in merged:
                raise InputError(f"unknown control channel {ch!r}; expected one of {CHANNELS}")
            try:
                merged[ch] = (float(spec["lower_deg"]), float(spec["upper_deg"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"limits for {ch!r} need numeric 'lower_deg' and 'upper_deg'") from exc
        return cls.from_degrees(merged)


def clamp_channel(u_tilde: float, lo: float, hi: float) -> float:
    """Three-branch saturation of one channel."""
    if not lo < hi:
        raise ValidationError(f"need lo < hi, got lo={lo}, hi={hi}")
    if u_tilde <= lo:
        return lo
    if u_tilde >= hi:
        return hi
    return u_tilde


@dataclass(frozen=True, eq=False)
class BoundedController:
    """``u = sat(-F x_aug)`` with per-channel limits.

    Pass the synthesis ``R`` to have its diagonality checked; the per-channel
    clamp is only the constrained optimum when ``R`` is diagonal.
    """

    F: np.ndarray
    limits: ControlLimits = field(default_factory=ControlLimits.default)
    R: np.ndarray | None = None

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.ndim != 2 or F.shape[0] != N_INPUTS:
            raise DimensionError(f"gain must be {N_INPUTS} x n, got {F.shape}")
        if self.R is not None:
            R = np.asarray(self.R, dtype=float)
            if R.shape != (N_INPUTS, N_INPUTS):
                raise DimensionError(f"R must be {N_INPUTS}x{N_INPUTS}")
            if np.any(R - np.diag(np.diag(R))):
                raise ValidationError("per-channel clamping requires a diagonal R")
        F.flags.writeable = False
        object.__setattr__(self, "F", F)

    @property
    def n_states(self) -> int:
        return self.F.shape[1]

    def raw(self, x_aug: np.ndarray) -> np.ndarray:
        return -(self.F @ x_aug)

    def saturate(self, u: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(u, self.limits.lower), self.limits.upper)


def _as_state(ctrl: BoundedController, x_aug) -> np.ndarray:
    x = np.asarray(x_aug, dtype=float)
    if x.shape != (ctrl.n_states,):
        raise DimensionError(f"expected state of length {ctrl.n_states}, got {x.shape}")
    return x


def unbounded_control(ctrl: BoundedController, x_aug) -> ControlInput:
    """``-F x_aug`` with no clamping."""
    return ControlInput.from_array(ctrl.raw(_as_state(ctrl, x_aug)))


def bounded_control(ctrl: BoundedController, x_aug) -> ControlInput:
    """Unbounded law clipped channel by channel to ``ctrl.limits``."""
    u = ctrl.raw(_as_state(ctrl, x_aug))
    lo, hi = ctrl.limits.lower, ctrl.limits.upper
    return ControlInput(*(clamp_channel(float(u[i]), float(lo[i]), float(hi[i])) for i in range(N_INPUTS)))
