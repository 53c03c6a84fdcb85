"""Matrix Riccati equation and LQR gain.

The cost-to-go kernel ``K(t)`` obeys the backward matrix Riccati ODE

    -K_dot = Q + K A + A^T K^T - K B R^-1 B^T K^T,   K(t_f) = H

whose steady state solves the algebraic Riccati equation (ARE). The optimal
state feedback is ``u = -F x`` with ``F = R^-1 B^T K``.

Both the finite-horizon solution and the steady state are obtained here by
integrating the ODE backward in time with a fixed-step classical RK4 scheme;
no Schur or Newton machinery is involved.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    InputError,
    IntegrationError,
    NumericalError,
    StabilizabilityError,
    ValidationError,
)

PSD_TOL = 1e-10
# ||K||_max beyond this during backward integration is treated as divergence
OVERFLOW_GUARD = 1e14


@dataclass(frozen=True)
class RiccatiConfig:
    """Backward-integration settings.

    ``step`` is the RK4 step in seconds, ``tol`` the threshold on the
    max-abs Riccati derivative that declares a steady state, and
    ``max_steps`` the hard iteration cap.
    """

    step: float = 1e-3
    tol: float = 1e-9
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValidationError(f"step must be > 0, got {self.step}")
        if not (self.tol > 0):
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True, eq=False)
class CareSolution:
    K: np.ndarray
    F: np.ndarray
    residual_norm: float
    closed_loop_spectrum: np.ndarray
    steps: int = 0

    @property
    def spectral_abscissa(self) -> float:
        """Largest real part of the closed-loop eigenvalues."""
        return float(np.max(self.closed_loop_spectrum.real))


@dataclass(frozen=True, eq=False)
class FiniteHorizonSolution:
    """``K`` sampled on an ascending time grid; ``K[-1]`` is the terminal weight."""

    times: np.ndarray
    K: np.ndarray

    def at(self, index: int) -> np.ndarray:
        return self.K[index]


def _as_matrices(A, B, Q, R):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n) or B.shape[0] != n:
        raise DimensionError(f"non-conformable A {A.shape}, B {B.shape}, Q {Q.shape}")
    m = B.shape[1]
    if R.shape != (m, m):
        raise DimensionError(f"R must be {m}x{m}, got {R.shape}")
    return A, B, Q, R


def _input_weight(B: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``S = B R^-1 B^T``."""
    try:
        RinvBt = np.linalg.solve(R, B.T)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("R is singular") from exc
    if np.linalg.cond(R) > 1e14:
        raise NumericalError("R is singular to working precision")
    S = B @ RinvBt
    return 0.5 * (S + S.T)


@numba.njit(cache=True)
def _rhs(K, A, S, Q):
    KA = K @ A
    out = Q + KA + KA.T - K @ S @ K.T
    return 0.5 * (out + out.T)


def riccati_rhs(K, A, B, Q, R) -> np.ndarray:
    """``-K_dot = Q + K A + A^T K^T - K B R^-1 B^T K^T`` (symmetrized)."""
    A, B, Q, R = _as_matrices(A, B, Q, R)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != A.shape:
        raise DimensionError(f"K must be {A.shape}, got {K.shape}")
    return _rhs(K, A, _input_weight(B, R), Q)


def care_residual(K, A, B, Q, R) -> float:
    """Max-abs norm of the ARE left-hand side at ``K``."""
    return float(np.abs(riccati_rhs(K, A, B, Q, R)).max())


def feedback_gain(K, B, R) -> np.ndarray:
    """``F = R^-1 B^T K``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if B.shape[0] != K.shape[0] or R.shape != (B.shape[1], B.shape[1]):
        raise DimensionError(f"non-conformable K {K.shape}, B {B.shape}, R {R.shape}")
    try:
        return np.linalg.solve(R, B.T @ K)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("R is singular") from exc


@numba.njit(cache=True)
def _rk4_backward(K, A, S, Q, h):
    # d/d(tau) K = rhs(K) with tau = t_f - t, so a forward step in tau is a backward step in t
    k1 = _rhs(K, A, S, Q)
    k2 = _rhs(K + 0.5 * h * k1, A, S, Q)
    k3 = _rhs(K + 0.5 * h * k2, A, S, Q)
    k4 = _rhs(K + h * k3, A, S, Q)
    K_next = K + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (K_next + K_next.T)


@numba.njit(cache=True)
def _march_to_steady_state(K, A, S, Q, h, tol, max_steps, guard):
    """Step until max|K_dot| <= tol; returns (K, K_dot, steps, status).

    status: 0 converged, 1 step budget exhausted, 2 diverged.
    """
    steps = 0
    while True:
        Kdot = _rhs(K, A, S, Q)
        if np.abs(Kdot).max() <= tol:
            return K, Kdot, steps, 0
        if steps >= max_steps:
            return K, Kdot, steps, 1
        K = _rk4_backward(K, A, S, Q, h)
        steps += 1
        if not np.isfinite(K).all() or np.abs(K).max() > guard:
            return K, Kdot, steps, 2


@numba.njit(cache=True)
def _march_fixed(K, A, S, Q, h, n_steps, guard):
    out = np.empty((n_steps + 1, K.shape[0], K.shape[1]))
    out[n_steps] = K
    for k in range(1, n_steps + 1):
        K = _rk4_backward(K, A, S, Q, h)
        if not np.isfinite(K).all() or np.abs(K).max() > guard:
            return out, k
        out[n_steps - k] = K
    return out, 0


def _diverged(step):
    raise IntegrationError(
        f"Riccati integration diverged at step {step}; reduce the step size", step=step
    )


def solve_finite_horizon(A, B, Q, R, H, horizon: float,
                         cfg: RiccatiConfig | None = None) -> FiniteHorizonSolution:
    """Integrate the Riccati ODE backward from ``K(t_f) = H`` over ``horizon`` seconds.

    The step is ``cfg.step`` shrunk just enough to land exactly on ``t_0 = 0``.
    """
    cfg = cfg or RiccatiConfig()
    A, B, Q, R = _as_matrices(A, B, Q, R)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape != A.shape:
        raise DimensionError(f"H must be {A.shape}, got {H.shape}")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValidationError("H must be symmetric")
    if np.linalg.eigvalsh(0.5 * (H + H.T)).min() < -PSD_TOL * max(1.0, np.abs(H).max()):
        raise ValidationError("H must be positive semidefinite")
    if not horizon > 0:
        raise ValidationError(f"horizon must be > 0, got {horizon}")
    n_steps = max(1, math.ceil(horizon / cfg.step - 1e-9))
    if n_steps > cfg.max_steps:
        raise ConvergenceError(f"horizon needs {n_steps} steps, more than max_steps={cfg.max_steps}")
    h = horizon / n_steps
    S = _input_weight(B, R)

    Ks, failed_at = _march_fixed(0.5 * (H + H.T), A, S, Q, h, n_steps, OVERFLOW_GUARD)
    if failed_at:
        _diverged(failed_at)
    times = np.linspace(0.0, horizon, n_steps + 1)
    return FiniteHorizonSolution(times=times, K=Ks)


def solve_care(A, B, Q, R, cfg: RiccatiConfig | None = None) -> CareSolution:
    """Steady-state Riccati solution by backward integration from ``K = 0``.

    Integration stops once ``||K_dot||_max <= tol``, so the returned residual
    is below ``tol`` by construction.

    Raises
    ------
    ConvergenceError
        ``max_steps`` were used up before reaching a steady state.
    StabilizabilityError
        The converged gain leaves a closed-loop eigenvalue with Re >= 0.
    """
    cfg = cfg or RiccatiConfig()
    A, B, Q, R = _as_matrices(A, B, Q, R)
    S = _input_weight(B, R)
    # K rises monotonically from 0 to the stabilizing root; starting at Q instead
    # makes the first steps stiff whenever B R^-1 B^T is large.
    K0 = np.zeros_like(A)
    K, Kdot, steps, status = _march_to_steady_state(
        K0, A, S, Q, cfg.step, cfg.tol, cfg.max_steps, OVERFLOW_GUARD
    )
    if status == 1:
        raise ConvergenceError(
            f"Riccati integration did not reach steady state in {cfg.max_steps} steps "
            f"(||K_dot||_max = {np.abs(Kdot).max():.3g})"
        )
    if status == 2:
        _diverged(steps)

    lo = np.linalg.eigvalsh(K).min() if K.size else 0.0
    if lo < -PSD_TOL * max(1.0, np.abs(K).max()):
        raise StabilizabilityError(f"converged K is indefinite (min eigenvalue {lo:.3g})")
    F = feedback_gain(K, B, R)
    spectrum = np.linalg.eigvals(A - B @ F)
    if np.any(spectrum.real >= 0):
        raise StabilizabilityError(
            f"closed loop is not Hurwitz (spectral abscissa {spectrum.real.max():.3g}); "
            "(A, B) may not be stabilizable"
        )
    order = np.lexsort((spectrum.imag, spectrum.real))
    return CareSolution(
        K=K,
        F=F,
        residual_norm=float(np.abs(Kdot).max()),
        closed_loop_spectrum=spectrum[order],
        steps=steps,
    )


def gain_dump(sol: CareSolution) -> dict:
    """JSON-ready dictionary of a :class:`CareSolution`."""
    return {
        "K": sol.K.tolist(),
        "F": sol.F.tolist(),
        "residual": sol.residual_norm,
        "spectrum": [[float(z.real), float(z.imag)] for z in sol.closed_loop_spectrum],
    }


def write_gain_dump(sol: CareSolution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(gain_dump(sol), indent=2) + "\n")


def read_gain_dump(path: str | Path) -> CareSolution:
    try:
        doc = json.loads(Path(path).read_text())
        return CareSolution(
            K=np.asarray(doc["K"], dtype=float),
            F=np.asarray(doc["F"], dtype=float),
            residual_norm=float(doc["residual"]),
            closed_loop_spectrum=np.array([complex(re, im) for re, im in doc["spectrum"]]),
        )
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read gain dump {path}: {exc}") from exc
