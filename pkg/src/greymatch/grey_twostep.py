"""Classical two-step estimation on the cumulative series.

Pipeline: cumulative sums, midpoint-discretized design matrix, least squares
for the structural parameters, then a separate initial-value selection, and
finally forecasting by integrating the cumulative model and differencing back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .core import (
    ConfigError,
    FitResult,
    Forecast,
    GREY_FORM,
    METHOD_GREY_TWOSTEP,
    ModelSpec,
    OptimizerError,
    ParameterSet,
    RootSearchError,
    SingularDesignError,
    TimeSeries,
    evaluate_basis,
)
from .ode import default_substeps, solve_grey
from .transform import CusumSeries, cusum

FIX_FIRST = "fix_first"
FIX_LAST = "fix_last"
RESIDUAL_CORRECTION = "residual_correction"
INITIAL_STRATEGIES = (FIX_FIRST, FIX_LAST, RESIDUAL_CORRECTION)


@dataclass(frozen=True)
class GreyFitConfig:
    """Options of the two-step pipeline.

    ``background_coefficient`` blends consecutive cumulative values into the
    background value z(t_k) = lam * y(t_{k-1}) + (1 - lam) * y(t_k); 0.5 is
    the conventional midpoint.  ``initial_values`` overrides the selection
    strategy with fixed values (used e.g. to seed the solver with the true
    initial condition in simulation studies).
    """

    background_coefficient: float = 0.5
    initial_value_strategy: str = FIX_FIRST
    substeps: Optional[int] = None
    initial_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.background_coefficient <= 1.0:
            raise ConfigError("background_coefficient must lie in [0, 1]")
        if self.initial_value_strategy not in INITIAL_STRATEGIES:
            raise ConfigError(
                f"unknown initial_value_strategy {self.initial_value_strategy!r}; "
                f"expected one of {INITIAL_STRATEGIES}"
            )


def build_design_grey(ycum: CusumSeries, ts: TimeSeries, spec: ModelSpec,
                      background_coefficient: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Design and target matrices of the midpoint-discretized cumulative model.

    Row k-1 of the design holds [z(t_k), N(z(t_k)), 1] (linear block only when
    the spec includes it, constant column only when the spec has one), and the
    matching target row is the observation x(t_k), for k = 2..n.
    """
    lam = background_coefficient
    y = ycum.cum_values
    z = lam * y[:-1] + (1.0 - lam) * y[1:]
    rows = z.shape[0]
    blocks = []
    if spec.include_linear:
        blocks.append(z)
    if spec.p > 0:
        blocks.append(np.vstack([evaluate_basis(spec.basis, z[k]) for k in range(rows)]))
    if spec.include_constant:
        blocks.append(np.ones((rows, 1)))
    design = np.hstack(blocks)
    targets = ts.values[1:]
    return design, targets


def least_squares_solve(design: np.ndarray, targets: np.ndarray,
                        rank_tolerance: float = 1e-10) -> Tuple[np.ndarray, float]:
    """Minimum-residual solve of design @ coef = targets via orthogonal factorization.

    Raises SingularDesignError when the smallest singular value falls below
    ``rank_tolerance`` times the largest, reporting the condition estimate.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    s = np.linalg.svd(design, compute_uv=False)
    if s.size == 0 or s[0] == 0.0 or s[-1] / s[0] < rank_tolerance:
        condition = float("inf") if s.size == 0 or s[-1] == 0.0 else float(s[0] / s[-1])
        raise SingularDesignError(
            f"design matrix is numerically singular (condition ~ {condition:.3g})",
            condition=condition,
        )
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return coef, float(s[0] / s[-1])


def _unpack_structural(coef: np.ndarray, spec: ModelSpec):
    d, p = spec.dimension, spec.p
    row = 0
    if spec.include_linear:
        theta_L = coef[row:row + d].T
        row += d
    else:
        theta_L = np.zeros((d, d))
    theta_N = coef[row:row + p].T if p > 0 else np.zeros((d, 0))
    row += p
    beta = coef[row] if spec.include_constant else None
    return theta_L, theta_N, beta


def _last_point_bracket(column: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(column.min()), float(column.max())
    span = hi - lo
    if span == 0.0:
        span = max(1.0, abs(hi))
    return lo - 0.5 * span, hi + 0.5 * span


def select_initial(strategy: str, ycum: CusumSeries, spec: ModelSpec,
                   theta_L: np.ndarray, theta_N: np.ndarray,
                   beta: Optional[np.ndarray] = None,
                   substeps: Optional[int] = None) -> np.ndarray:
    """Pick the initial value of the cumulative model given structural estimates.

    Strategies: fix the first cumulative sample, match the last cumulative
    sample by root search, or minimize the summed squared trajectory residual
    with a derivative-free simplex search seeded at the first sample.
    """
    y = ycum.cum_values
    if strategy == FIX_FIRST:
        return y[0].copy()

    times = ycum.times
    if substeps is None:
        substeps = default_substeps(times)

    def trajectory(eta):
        params = ParameterSet(theta_L, theta_N, eta, beta=beta, form=GREY_FORM)
        return solve_grey(spec, params, times, substeps)

    if strategy == FIX_LAST:
        target = y[-1]
        eta = y[0].astype(float).copy()

        def component_mismatch(value, i):
            eta[i] = value
            traj = trajectory(eta)
            if traj.blown_up:
                # use the last finite state as a signed surrogate so the
                # bracket stays usable when an endpoint trajectory diverges
                last = max(traj.blowup_index - 1, 0)
                surrogate = traj.states[last, i] - target[i]
                return 1e30 if surrogate >= 0.0 else -1e30
            return traj.states[-1, i] - target[i]

        sweeps = 1 if spec.dimension == 1 else 50
        for _ in range(sweeps):
            previous = eta.copy()
            for i in range(spec.dimension):
                lo, hi = _last_point_bracket(y[:, i])
                f_lo = component_mismatch(lo, i)
                f_hi = component_mismatch(hi, i)
                if f_lo == 0.0 or f_hi == 0.0:
                    eta[i] = lo if f_lo == 0.0 else hi
                    continue
                if np.sign(f_lo) == np.sign(f_hi):
                    raise RootSearchError(
                        f"no sign change for component {i} in bracket [{lo:.6g}, {hi:.6g}]"
                    )
                eta[i] = optimize.brentq(component_mismatch, lo, hi, args=(i,), xtol=1e-12)
            if np.max(np.abs(eta - previous)) < 1e-10:
                break
        return eta

    if strategy == RESIDUAL_CORRECTION:
        def objective(eta):
            traj = trajectory(eta)
            if traj.blown_up:
                return 1e300
            return float(np.sum((traj.states - y) ** 2))

        result = optimize.minimize(
            objective, y[0], method="Nelder-Mead",
            options={"maxiter": 500, "fatol": 1e-10, "xatol": 1e-8},
        )
        if not result.success:
            raise OptimizerError(f"residual-correction search did not converge: {result.message}")
        return np.atleast_1d(result.x)

    raise ConfigError(f"unknown initial_value_strategy {strategy!r}")


def masked_row_solve(linear_block: Optional[np.ndarray],
                     nonlinear_block: Optional[np.ndarray],
                     include_constant: bool,
                     targets: np.ndarray,
                     linear_mask: np.ndarray,
                     nonlinear_mask: np.ndarray):
    """Row-by-row least squares with structurally zero coefficients dropped.

    Multi-target least squares decouples per output, so each output row is
    regressed on the columns its masks leave free; masked coefficients stay
    exactly zero.  Returns (theta_L, theta_N, beta, residuals, condition).
    """
    rows, d = targets.shape
    p = 0 if nonlinear_block is None else nonlinear_block.shape[1]
    theta_L = np.zeros((d, d))
    theta_N = np.zeros((d, p))
    beta = np.zeros(d) if include_constant else None
    residuals = np.empty_like(targets)
    condition = 0.0
    for i in range(d):
        blocks = []
        if linear_block is not None:
            blocks.append(linear_block[:, linear_mask[i]])
        if nonlinear_block is not None and nonlinear_mask[i].any():
            blocks.append(nonlinear_block[:, nonlinear_mask[i]])
        if include_constant:
            blocks.append(np.ones((rows, 1)))
        if not blocks:
            raise ConfigError(f"output {i} has no free coefficients")
        design_i = np.hstack(blocks)
        coef_i, cond_i = least_squares_solve(design_i, targets[:, i:i + 1])
        coef_i = coef_i[:, 0]
        condition = max(condition, cond_i)
        pos = 0
        if linear_block is not None:
            k = int(linear_mask[i].sum())
            theta_L[i, linear_mask[i]] = coef_i[pos:pos + k]
            pos += k
        if nonlinear_block is not None and nonlinear_mask[i].any():
            k = int(nonlinear_mask[i].sum())
            theta_N[i, nonlinear_mask[i]] = coef_i[pos:pos + k]
            pos += k
        if include_constant:
            beta[i] = coef_i[pos]
        residuals[:, i] = targets[:, i] - design_i @ coef_i
    return theta_L, theta_N, beta, residuals, condition


def fit_grey(ts: TimeSeries, spec: ModelSpec,
             config: Optional[GreyFitConfig] = None) -> FitResult:
    """Two-step fit: least squares on the cumulative design, then initial value."""
    if config is None:
        config = GreyFitConfig()
    if ts.d != spec.dimension:
        raise ConfigError(f"series has {ts.d} variables, spec expects {spec.dimension}")
    if ts.n < spec.dimension + spec.p + 2:
        raise ConfigError(
            f"need at least {spec.dimension + spec.p + 2} samples, got {ts.n}"
        )
    ycum = cusum(ts)
    if spec.has_masks:
        lam = config.background_coefficient
        y = ycum.cum_values
        z = lam * y[:-1] + (1.0 - lam) * y[1:]
        nonlinear = (np.vstack([evaluate_basis(spec.basis, row) for row in z])
                     if spec.p > 0 else None)
        theta_L, theta_N, beta, residuals, condition = masked_row_solve(
            z if spec.include_linear else None, nonlinear, spec.include_constant,
            ts.values[1:], spec.linear_mask(), spec.nonlinear_mask())
    else:
        design, targets = build_design_grey(ycum, ts, spec, config.background_coefficient)
        coef, condition = least_squares_solve(design, targets)
        theta_L, theta_N, beta = _unpack_structural(coef, spec)
        residuals = targets - design @ coef
    if config.initial_values is not None:
        eta = np.atleast_1d(np.asarray(config.initial_values, dtype=float))
    else:
        eta = select_initial(config.initial_value_strategy, ycum, spec,
                             theta_L, theta_N, beta, config.substeps)
    params = ParameterSet(theta_L, theta_N, eta, beta=beta, form=GREY_FORM)
    return FitResult(spec, params, METHOD_GREY_TWOSTEP, residuals, condition, ts.times)


def extend_times(times: np.ndarray, horizon: int,
                 future_times=None) -> np.ndarray:
    """Append ``horizon`` future stamps, spaced by the mean spacing unless given."""
    times = np.asarray(times, dtype=float)
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if horizon == 0:
        return times.copy()
    if future_times is not None:
        future = np.asarray(future_times, dtype=float)
        if future.size != horizon:
            raise ConfigError(f"expected {horizon} future stamps, got {future.size}")
        grid = np.concatenate([times, future])
        if not np.all(np.diff(grid) > 0):
            raise ConfigError("future stamps must continue the grid strictly increasing")
        return grid
    mean_h = (times[-1] - times[0]) / (times.size - 1)
    return np.concatenate([times, times[-1] + mean_h * np.arange(1, horizon + 1)])


def forecast_grey(fit: FitResult, horizon: int,
                  config: Optional[GreyFitConfig] = None,
                  future_times=None) -> Forecast:
    """Integrate the fitted cumulative model and difference back to the original scale."""
    if config is None:
        config = GreyFitConfig()
    grid = extend_times(fit.times, horizon, future_times)
    substeps = config.substeps if config.substeps is not None else default_substeps(grid)
    traj = solve_grey(fit.spec, fit.params, grid, substeps)
    y = traj.states
    x = np.empty_like(y)
    x[0] = y[0]
    if grid.size > 1:
        x[1:] = np.diff(y, axis=0) / np.diff(grid)[:, None]
    return Forecast(grid, x, horizon, blown_up=traj.blown_up,
                    blowup_index=traj.blowup_index)
