"""Fixed-step integration of the unified model and its reduced augmented system.

The integrator is a classical 4th-order Runge-Kutta scheme with a fixed number
of substeps per sampling interval; determinism matters more than adaptivity
here because the Monte Carlo harness must be exactly reproducible.  Divergence
is detected with an overflow guard and reported via a flag, never an
unhandled NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    BlowUpError,
    ModelSpec,
    ParameterSet,
    REDUCED_FORM,
    _readonly,
)

OVERFLOW_GUARD = 1e12

#: largest internal step (in sample-time units) used by the default policy
DEFAULT_MAX_STEP = 0.01

VectorField = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trajectory:
    """States recorded at the sample times, with an explicit divergence flag.

    When ``blown_up`` is true, ``blowup_index`` is the first sample index whose
    state could not be computed; that row and all later rows are NaN.
    """

    times: np.ndarray
    states: np.ndarray
    blown_up: bool = False
    blowup_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "states", _readonly(self.states))


def default_substeps(times, max_step: float = DEFAULT_MAX_STEP) -> int:
    """Substeps per interval so every internal step is <= min(h_k, max_step)."""
    h = np.diff(np.asarray(times, dtype=float))
    if h.size == 0:
        return 1
    return max(1, int(math.ceil(float(h.max()) / max_step - 1e-12)))


def _within_guard(state: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(state)) and np.max(np.abs(state)) < OVERFLOW_GUARD)


def rk4_integrate(rhs: VectorField, initial, times, substeps: int = 1) -> Trajectory:
    """Integrate d(state)/dt = rhs(t, state) with classical RK4.

    Each interval between consecutive sample times is split into ``substeps``
    equal internal steps; only the sample times are recorded.  If any
    intermediate state is non-finite or exceeds the overflow guard the
    trajectory is flagged as blown up and the remaining rows stay NaN.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    times = np.asarray(times, dtype=float)
    state = np.atleast_1d(np.asarray(initial, dtype=float)).copy()
    out = np.full((times.size, state.size), np.nan)
    if not _within_guard(state):
        return Trajectory(times, out, blown_up=True, blowup_index=0)
    out[0] = state
    sixth = 1.0 / 6.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(1, times.size):
            dt = (times[k] - times[k - 1]) / substeps
            half = 0.5 * dt
            t = times[k - 1]
            ok = True
            for _ in range(substeps):
                k1 = rhs(t, state)
                k2 = rhs(t + half, state + half * k1)
                k3 = rhs(t + half, state + half * k2)
                k4 = rhs(t + dt, state + dt * k3)
                state = state + dt * sixth * (k1 + 2.0 * (k2 + k3) + k4)
                t += dt
                if not _within_guard(state):
                    ok = False
                    break
            if not ok:
                return Trajectory(times, out, blown_up=True, blowup_index=k)
            out[k] = state
    return Trajectory(times, out, blown_up=False)


def grey_rhs(spec: ModelSpec, params: ParameterSet) -> VectorField:
    """Vector field of the cumulative-state model dy/dt = theta_L y + theta_N N(y) + beta."""
    theta_L = params.theta_L
    theta_N = params.theta_N
    beta = params.beta_or_zero()
    basis = spec.basis
    if basis is None:
        return lambda t, y: theta_L @ y + beta

    def rhs(t, y):
        return theta_L @ y + theta_N @ basis.evaluate(y) + beta

    return rhs


def reduced_augmented_rhs(spec: ModelSpec, params: ParameterSet) -> VectorField:
    """Vector field of the reduced model as a first-order system on (x, y).

    The running integral y(t) = eta + int x is carried as extra state, so the
    chain-rule term d/dt N(y) = J_N(y) x uses the analytic basis Jacobian:

        dx/dt = theta_L x + theta_N J_N(y) x,   dy/dt = x.
    """
    if params.form != REDUCED_FORM:
        raise ValueError("expected reduced-form parameters")
    d = spec.dimension
    theta_L = params.theta_L
    theta_N = params.theta_N
    basis = spec.basis
    if basis is None:
        def rhs(t, u):
            x = u[:d]
            return np.concatenate([theta_L @ x, x])
        return rhs

    def rhs(t, u):
        x = u[:d]
        dx = theta_L @ x + theta_N @ (basis.jacobian(u[d:]) @ x)
        return np.concatenate([dx, x])

    return rhs


def reduced_initial_state(params: ParameterSet) -> np.ndarray:
    """Augmented initial state (x(t1), y(t1)) = (eta_x, eta) for the reduced system."""
    return np.concatenate([params.initial_state(), params.eta])


def solve_grey(spec: ModelSpec, params: ParameterSet, times,
               substeps: Optional[int] = None) -> Trajectory:
    """Cumulative-state trajectory of the grey model from eta."""
    if substeps is None:
        substeps = default_substeps(times)
    return rk4_integrate(grey_rhs(spec, params), params.eta, times, substeps)


def solve_reduced(spec: ModelSpec, params: ParameterSet, times,
                  substeps: Optional[int] = None) -> Trajectory:
    """Trajectory of the reduced augmented system; columns 0..d-1 hold x, d..2d-1 hold y."""
    if substeps is None:
        substeps = default_substeps(times)
    rhs = reduced_augmented_rhs(spec, params)
    return rk4_integrate(rhs, reduced_initial_state(params), times, substeps)


# ---------------------------------------------------------------------------
# Closed-form logistic oracles
# ---------------------------------------------------------------------------

def _verhulst_denominator(a: float, b: float, eta: float, t, t1: float):
    decay = np.exp(-a * (np.asarray(t, dtype=float) - t1))
    return -b / a + decay * (1.0 / eta + b / a), decay


def verhulst_closed_form_y(a: float, b: float, eta: float, t, t1: float = 0.0):
    """Closed-form cumulative state of dy/dt = a y + b y^2, y(t1) = eta."""
    if a == 0.0 or eta == 0.0:
        raise ValueError("closed form requires a != 0 and eta != 0")
    denom, _ = _verhulst_denominator(a, b, eta, t, t1)
    if np.any(np.abs(denom) < 1e-12):
        raise BlowUpError("logistic closed form is singular at the requested time")
    return 1.0 / denom


def verhulst_closed_form_x(a: float, b: float, eta: float, t, t1: float = 0.0):
    """Time derivative of the closed-form logistic, i.e. the original-state solution.

    Equals a * exp(-a (t - t1)) (b/a + 1/eta) / denom^2, which is exactly
    d/dt of the cumulative closed form (verified against central differences
    in the test suite).
    """
    if a == 0.0 or eta == 0.0:
        raise ValueError("closed form requires a != 0 and eta != 0")
    denom, decay = _verhulst_denominator(a, b, eta, t, t1)
    if np.any(np.abs(denom) < 1e-12):
        raise BlowUpError("logistic closed form is singular at the requested time")
    return a * decay * (b / a + 1.0 / eta) / denom ** 2
