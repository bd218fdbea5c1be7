"""One-step estimation on the original series via a running-integral proxy.

The trapezoidal cumulative integral stands in for the running integral of the
state, a binomial / quadratic-expansion change of basis turns the resulting
regression into a linear one whose intercept *is* the initial value, and a
single least-squares solve recovers structural parameters and initial value
simultaneously.  Power-law bases, where the expansion does not apply, fall
back to substituting the first observation inside the nonlinearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .core import (
    ConfigError,
    DomainError,
    FitResult,
    Forecast,
    GreyModelError,
    METHOD_INTEGRAL_MATCHING,
    METHOD_INTEGRAL_MATCHING_POWER,
    ModelSpec,
    ParameterSet,
    PolynomialUnivariate,
    PowerUnivariate,
    QuadraticMultivariate,
    REDUCED_FORM,
    TimeSeries,
    _readonly,
    evaluate_basis,
)
from .grey_twostep import extend_times, least_squares_solve
from .ode import default_substeps, solve_reduced
from .transform import trapezoid_cumulative

FAMILY_INGM = "ingm"      # power term only, no linear term
FAMILY_INGBM = "ingbm"    # linear plus power term


@dataclass(frozen=True)
class TransformedParameters:
    """Coefficients of the pseudo-linear regression; the intercept equals eta."""

    vartheta_L: np.ndarray    # (d, d)
    vartheta_N: np.ndarray    # (d, p)
    intercept: np.ndarray     # (d,)

    def __post_init__(self):
        object.__setattr__(self, "vartheta_L", _readonly(np.atleast_2d(self.vartheta_L)))
        object.__setattr__(self, "vartheta_N", _readonly(np.atleast_2d(self.vartheta_N)))
        object.__setattr__(self, "intercept", _readonly(np.atleast_1d(self.intercept)))


def build_design_matching(ts: TimeSeries, spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Design [x~(t_k), N(x~(t_k)), 1] and targets x(t_k) for k = 2..n."""
    xtil = trapezoid_cumulative(ts)[1:]
    rows = xtil.shape[0]
    blocks = [xtil]
    if spec.p > 0:
        blocks.append(np.vstack([evaluate_basis(spec.basis, xtil[k]) for k in range(rows)]))
    blocks.append(np.ones((rows, 1)))
    return np.hstack(blocks), ts.values[1:]


def polynomial_shift_coefficients(eta: float, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Binomial change-of-basis data for the scalar polynomial family.

    For N(v) = [v^2, ..., v^(p+1)] the expansion of N(eta + v) - N(eta)
    contributes a linear part phi (p-vector with entries C(m+1, 1) eta^m) and
    a lower-triangular, unit-diagonal mixing matrix with entries
    C(m+1, j+1) eta^(m-j).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    phi = np.array([math.comb(m + 1, 1) * eta ** m for m in range(1, p + 1)])
    varphi = np.zeros((p, p))
    for m in range(1, p + 1):
        for j in range(1, m + 1):
            varphi[m - 1, j - 1] = math.comb(m + 1, j + 1) * eta ** (m - j)
    return phi, varphi


def quadratic_shift_matrix(eta: np.ndarray) -> np.ndarray:
    """Linear part of N(eta + v) - N(eta) for the quadratic multivariate basis.

    Satisfies N(eta + v) - N(eta) = psi @ v + N(v) exactly: the row of the
    monomial y_i y_j carries eta_j at column i and eta_i at column j (summing
    to 2 eta_i on the diagonal monomials).
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    d = eta.size
    if d < 2:
        raise ValueError("quadratic basis requires d >= 2")
    basis = QuadraticMultivariate(d)
    psi = np.zeros((basis.size, d))
    for row, (i, j) in enumerate(basis.pairs):
        psi[row, i] += eta[j]
        psi[row, j] += eta[i]
    return psi


def transform_parameters(params: ParameterSet, spec: ModelSpec) -> TransformedParameters:
    """Forward change of basis: reduced-form parameters to regression coefficients."""
    if params.form != REDUCED_FORM:
        raise ValueError("expected reduced-form parameters")
    basis = spec.basis
    if isinstance(basis, PolynomialUnivariate):
        phi, varphi = polynomial_shift_coefficients(float(params.eta[0]), spec.p)
        vartheta_L = params.theta_L + (params.theta_N @ phi).reshape(1, 1)
        vartheta_N = params.theta_N @ varphi
    elif isinstance(basis, QuadraticMultivariate):
        vartheta_L = params.theta_L + params.theta_N @ quadratic_shift_matrix(params.eta)
        vartheta_N = params.theta_N
    elif basis is None:
        vartheta_L = params.theta_L
        vartheta_N = params.theta_N
    else:
        raise ConfigError("change of basis applies to polynomial and quadratic bases only")
    return TransformedParameters(vartheta_L, vartheta_N, params.eta)


def recover_parameters(pi: TransformedParameters, spec: ModelSpec) -> ParameterSet:
    """Invert the change of basis: regression coefficients to reduced-form parameters."""
    eta = pi.intercept
    basis = spec.basis
    if isinstance(basis, PolynomialUnivariate):
        phi, varphi = polynomial_shift_coefficients(float(eta[0]), spec.p)
        # theta_N varphi = vartheta_N with varphi lower-triangular, unit diagonal
        theta_N = solve_triangular(varphi.T, pi.vartheta_N.T,
                                   lower=False, unit_diagonal=True).T
        theta_L = pi.vartheta_L - (theta_N @ phi).reshape(1, 1)
    elif isinstance(basis, QuadraticMultivariate):
        theta_N = pi.vartheta_N
        theta_L = pi.vartheta_L - theta_N @ quadratic_shift_matrix(eta)
    elif basis is None:
        theta_N = pi.vartheta_N
        theta_L = pi.vartheta_L
    else:
        raise ConfigError("change of basis applies to polynomial and quadratic bases only")
    return ParameterSet(theta_L, theta_N, eta, form=REDUCED_FORM)


def fit_matching(ts: TimeSeries, spec: ModelSpec) -> FitResult:
    """One-step fit of structural parameters and initial value.

    Polynomial and quadratic bases go through the exact change of basis;
    a power basis is routed to the first-observation fallback.

    Nonlinear-block masks are honored exactly for the quadratic basis (its
    nonlinear coefficients are untouched by the change of basis).  Masks on
    the linear block cannot be imposed here: the transformed linear
    coefficients mix all components through the initial value, so that block
    is always estimated in full and a structurally diagonal theta_L is only
    recovered up to noise.
    """
    if isinstance(spec.basis, PowerUnivariate):
        return fit_matching_power(ts, spec.basis.gamma,
                                  include_linear=spec.include_linear, spec=spec)
    if not spec.include_linear:
        raise ConfigError("dropping the linear term is supported for the power family only")
    if ts.d != spec.dimension:
        raise ConfigError(f"series has {ts.d} variables, spec expects {spec.dimension}")
    if ts.n < spec.dimension + spec.p + 2:
        raise ConfigError(
            f"need at least {spec.dimension + spec.p + 2} samples, got {ts.n}"
        )
    d, p = spec.dimension, spec.p
    if spec.theta_N_mask is not None:
        if not isinstance(spec.basis, QuadraticMultivariate):
            raise ConfigError(
                "nonlinear-block masks require the quadratic basis here; the "
                "polynomial change of basis mixes nonlinear coefficients"
            )
        from .grey_twostep import masked_row_solve

        xtil = trapezoid_cumulative(ts)[1:]
        nonlinear = np.vstack([evaluate_basis(spec.basis, row) for row in xtil])
        # transformed linear block and intercept are always fully free
        vartheta_L, vartheta_N, eta, residuals, condition = masked_row_solve(
            xtil, nonlinear, True, ts.values[1:],
            np.ones((d, d), dtype=bool), spec.nonlinear_mask())
        pi = TransformedParameters(vartheta_L, vartheta_N, eta)
    else:
        design, targets = build_design_matching(ts, spec)
        coef, condition = least_squares_solve(design, targets)
        pi = TransformedParameters(coef[:d].T,
                                   coef[d:d + p].T if p > 0 else np.zeros((d, 0)),
                                   coef[d + p])
        residuals = targets - design @ coef
    params = recover_parameters(pi, spec)
    return FitResult(spec, params, METHOD_INTEGRAL_MATCHING, residuals, condition, ts.times)


def fit_matching_power(ts: TimeSeries, gamma: float, include_linear: bool = True,
                       spec: Optional[ModelSpec] = None) -> FitResult:
    """Power-family fit with the first observation substituted inside N(.).

    Regresses x(t_k) on [x~(t_k), N(x(t1) + x~(t_k)) - N(x(t1)), 1] (dropping
    the linear column for the no-linear-term family).  The solve is a
    minimum-norm least squares: at gamma = 1 the power column duplicates the
    linear one and at gamma = 0 it vanishes, in which case the minimum-norm
    solution splits or zeroes the coefficients instead of failing.
    """
    if ts.d != 1:
        raise ConfigError("the power fallback is defined for scalar series")
    if ts.n < 4:
        raise ConfigError(f"need at least 4 samples, got {ts.n}")
    x1 = float(ts.values[0, 0])
    xtil = trapezoid_cumulative(ts)[1:, 0]
    shifted = x1 + xtil
    integral_gamma = float(gamma).is_integer()
    if not integral_gamma and (x1 <= 0.0 or np.any(shifted <= 0.0)):
        raise DomainError(
            f"power basis with gamma={gamma} needs x(t1) + x~ > 0 everywhere"
        )
    ncol = shifted ** gamma - x1 ** gamma
    columns = [ncol, np.ones_like(ncol)]
    if include_linear:
        columns.insert(0, xtil)
    design = np.column_stack(columns)
    targets = ts.values[1:]
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    s = np.linalg.svd(design, compute_uv=False)
    condition = float(s[0] / s[-1]) if s[-1] > 0.0 else float("inf")
    idx = 0
    theta_L = np.zeros((1, 1))
    if include_linear:
        theta_L[0, 0] = coef[idx, 0]
        idx += 1
    theta_N = coef[idx:idx + 1].T
    eta = coef[idx + 1]
    params = ParameterSet(theta_L, theta_N, eta, form=REDUCED_FORM)
    residuals = targets - design @ coef
    if spec is None:
        spec = ModelSpec(1, PowerUnivariate(gamma), include_constant=False,
                         include_linear=include_linear)
    return FitResult(spec, params, METHOD_INTEGRAL_MATCHING_POWER, residuals,
                     condition, ts.times)


def forecast_matching(fit: FitResult, horizon: int,
                      substeps: Optional[int] = None,
                      future_times=None) -> Forecast:
    """Integrate the fitted reduced system; the forecast is read off directly."""
    grid = extend_times(fit.times, horizon, future_times)
    if substeps is None:
        substeps = default_substeps(grid)
    traj = solve_reduced(fit.spec, fit.params, grid, substeps)
    x = traj.states[:, :fit.spec.dimension]
    return Forecast(grid, x, horizon, blown_up=traj.blown_up,
                    blowup_index=traj.blowup_index)


def gamma_line_search(ts: TimeSeries, family: str = FAMILY_INGBM,
                      search_range: Tuple[float, float] = (0.0, 2.0),
                      step: float = 0.01,
                      split: Optional[int] = None) -> Tuple[float, FitResult]:
    """Grid search over the power exponent, scored by forecasting error.

    With ``split`` given, each candidate is fitted on the first ``split``
    samples and scored by the MAPE of its fitted-plus-forecast trajectory over
    the whole series (the held-out stamps entered as true forecasts); without
    a split the in-sample RMSE is used.  Candidates whose fit or forecast
    fails are skipped; exact ties go to the smaller exponent.

    Returns the winning exponent and its (training-segment) fit.
    """
    from .metrics import mape, rmse, train_test_split

    if family not in (FAMILY_INGM, FAMILY_INGBM):
        raise ConfigError(f"unknown power family {family!r}")
    include_linear = family == FAMILY_INGBM
    lo, hi = float(search_range[0]), float(search_range[1])
    if not hi > lo or step <= 0.0:
        raise ConfigError("need an increasing search range and a positive step")
    if split is not None:
        if not 1 < split < ts.n:
            raise ConfigError(f"split must lie strictly inside (1, {ts.n})")
        if ts.n - split < 4:
            raise ConfigError("split must leave at least 4 test points")
        train, test = train_test_split(ts, split)
    count = int(round((hi - lo) / step)) + 1
    best: Optional[Tuple[float, float, FitResult]] = None
    for i in range(count):
        gamma = lo + i * step
        try:
            if split is None:
                fit = fit_matching_power(ts, gamma, include_linear)
                fitted = forecast_matching(fit, 0)
                if fitted.blown_up:
                    continue
                score = rmse(fitted.fitted_and_forecast[:, 0], ts.values[:, 0])
            else:
                fit = fit_matching_power(train, gamma, include_linear)
                forecast = forecast_matching(fit, test.n, future_times=test.times)
                if forecast.blown_up:
                    continue
                score = mape(forecast.fitted_and_forecast[:, 0], ts.values[:, 0])
        except GreyModelError:
            continue
        if not np.isfinite(score):
            continue
        if best is None or score < best[0]:
            best = (score, gamma, fit)
    if best is None:
        raise GreyModelError("every exponent candidate failed to fit or forecast")
    return best[1], best[2]
