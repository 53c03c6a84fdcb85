"""Tracking augmentation of the plant.

Three position-error states are prepended to the plant state. With a constant
reference the error obeys

    e_dot = -eta * [u, v, w]

so the augmented system is ``x_aug_dot = A_aug x_aug + B_aug u`` with

    A_aug = [[0_3x3, E(eta)], [0_14x3, A]],   B_aug = [[0_3x4], [B]]

where ``E(eta)`` holds ``-eta`` at the u, v and w columns of the plant block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import DimensionError, InputError, ValidationError
from .model import N_INPUTS, N_STATES, STATE_INDEX, RigidBodyState, StateSpaceModel

N_ERROR = 3
N_AUG = N_ERROR + N_STATES

ERROR_LABELS = ("e_N", "e_E", "e_A")
AUG_LABELS = ERROR_LABELS + RigidBodyState._fields

# columns of the 17-wide layout that receive -eta
VELOCITY_COLUMNS = tuple(N_ERROR + STATE_INDEX[s] for s in ("u", "v", "w"))

_SYM_TOL = 1e-12
_PSD_TOL = 1e-10


def _check_symmetric(M: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if not np.allclose(M, M.T, rtol=0.0, atol=_SYM_TOL * scale):
        raise ValidationError(f"{name} is not symmetric")


def _check_psd(M: np.ndarray, name: str) -> None:
    _check_symmetric(M, name)
    lo = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
    if lo < -_PSD_TOL * max(1.0, float(np.abs(M).max())):
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {lo:.3g})")


def _frozen(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.flags.writeable = False
    return M


@dataclass(frozen=True, eq=False)
class TrackingWeights:
    """Tracking gain ``eta`` and quadratic weights.

    ``Q`` must be symmetric PSD, ``R`` diagonal with a strictly positive
    diagonal, and ``H`` (terminal weight, finite horizon only) symmetric PSD.
    """

    eta: float
    Q: np.ndarray
    R: np.ndarray
    H: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ValidationError("eta must be finite")
        Q, R = _frozen(self.Q), _frozen(self.R)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got {Q.shape}")
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise DimensionError(f"R must be square, got {R.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(R))):
            raise ValidationError("Q and R must be finite")
        _check_psd(Q, "Q")
        _check_symmetric(R, "R")
        if np.any(R - np.diag(np.diag(R))):
            raise ValidationError("R must be diagonal")
        if np.any(np.diag(R) <= 0):
            raise ValidationError("R must have a strictly positive diagonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if self.H is not None:
            H = _frozen(self.H)
            if H.shape != Q.shape:
                raise DimensionError(f"H must match Q's shape {Q.shape}, got {H.shape}")
            _check_psd(H, "H")
            object.__setattr__(self, "H", H)

    @classmethod
    def scaled(cls, eta: float, q_scale: float, r_scale: float, h_scale: float | None = None,
               n_aug: int = N_AUG, n_inputs: int = N_INPUTS) -> "TrackingWeights":
        """``Q = q_scale * I``, ``R = r_scale * I`` (and optionally ``H``)."""
        H = None if h_scale is None else h_scale * np.eye(n_aug)
        return cls(eta=float(eta), Q=q_scale * np.eye(n_aug), R=r_scale * np.eye(n_inputs), H=H)

    def summary(self) -> dict[str, float | None]:
        """``eta`` plus the scalar Q/R scales when they are multiples of identity."""

        def scale(M):
            d = np.diag(M)
            if np.all(M == np.diag(d)) and np.all(d == d[0]):
                return float(d[0])
            return None

        return {"eta": float(self.eta), "q_scale": scale(self.Q), "r_scale": scale(self.R)}


def _matrix_or_scale(doc: Mapping[str, Any], key: str, scale_key: str, n: int,
                     required: bool) -> np.ndarray | None:
    if key in doc and scale_key in doc:
        raise InputError(f"give either '{key}' or '{scale_key}', not both")
    if key in doc:
        M = np.asarray(doc[key], dtype=float)
        if M.shape != (n, n):
            raise DimensionError(f"'{key}' must be {n}x{n}, got {M.shape}")
        return M
    if scale_key in doc:
        return float(doc[scale_key]) * np.eye(n)
    if required:
        raise InputError(f"weights need '{key}' or '{scale_key}'")
    return None


def weights_from_dict(doc: Mapping[str, Any]) -> TrackingWeights:
    """Parse a weights section: ``eta`` and ``Q``/``q_scale``, ``R``/``r_scale``, ``H``/``h_scale``."""
    if "eta" not in doc:
        raise InputError("weights need 'eta'")
    try:
        return TrackingWeights(
            eta=float(doc["eta"]),
            Q=_matrix_or_scale(doc, "Q", "q_scale", N_AUG, True),
            R=_matrix_or_scale(doc, "R", "r_scale", N_INPUTS, True),
            H=_matrix_or_scale(doc, "H", "h_scale", N_AUG, False),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed weights: {exc}") from exc


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    A_aug: np.ndarray
    B_aug: np.ndarray
    weights: TrackingWeights
    base: StateSpaceModel


def augment(model: StateSpaceModel, weights: TrackingWeights) -> AugmentedModel:
    """Prepend the three position-error states to ``model``."""
    n, m = model.n_states, model.n_inputs
    if (n, m) != (N_STATES, N_INPUTS):
        raise DimensionError(f"expected a {N_STATES}-state, {N_INPUTS}-input plant, got {n}, {m}")
    if weights.Q.shape != (N_AUG, N_AUG):
        raise DimensionError(f"Q must be {N_AUG}x{N_AUG}, got {weights.Q.shape}")
    if weights.R.shape != (N_INPUTS, N_INPUTS):
        raise DimensionError(f"R must be {N_INPUTS}x{N_INPUTS}, got {weights.R.shape}")

    A_aug = np.zeros((N_AUG, N_AUG))
    A_aug[N_ERROR:, N_ERROR:] = model.A
    for row, col in enumerate(VELOCITY_COLUMNS):
        A_aug[row, col] = -weights.eta
    B_aug = np.zeros((N_AUG, N_INPUTS))
    B_aug[N_ERROR:] = model.B
    return AugmentedModel(A_aug=_frozen(A_aug), B_aug=_frozen(B_aug), weights=weights, base=model)


def compose(error, state) -> np.ndarray:
    """Stack a 3-vector position error and a plant state into the 17-vector."""
    e = np.asarray(error, dtype=float)
    x = np.asarray(state, dtype=float)
    if e.shape != (N_ERROR,) or x.shape != (N_STATES,):
        raise DimensionError(f"expected shapes (3,) and (14,), got {e.shape} and {x.shape}")
    return np.concatenate([e, x])


def split(x_aug) -> tuple[np.ndarray, RigidBodyState]:
    """Inverse of :func:`compose`."""
    x_aug = np.asarray(x_aug, dtype=float)
    if x_aug.shape != (N_AUG,):
        raise DimensionError(f"expected shape ({N_AUG},), got {x_aug.shape}")
    return x_aug[:N_ERROR].copy(), RigidBodyState.from_array(x_aug[N_ERROR:])
