"""Shared domain types: time series, nonlinear bases, model specs and parameter sets.

Everything here is immutable after construction (frozen dataclasses holding
read-only arrays), so instances can be shared freely across threads and
Monte Carlo workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

GREY_FORM = "grey"
REDUCED_FORM = "reduced"

METHOD_GREY_TWOSTEP = "grey_twostep"
METHOD_INTEGRAL_MATCHING = "integral_matching"
METHOD_INTEGRAL_MATCHING_POWER = "integral_matching_power"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class GreyModelError(Exception):
    """Base class for all modelling errors raised by this package."""


class DomainError(GreyModelError):
    """A nonlinear basis was evaluated outside its mathematical domain."""


class SingularDesignError(GreyModelError):
    """The regression design matrix is (numerically) rank deficient."""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class BlowUpError(GreyModelError):
    """A trajectory or closed-form evaluation diverged in finite time."""


class RootSearchError(GreyModelError):
    """Initial-value root search failed (no sign change within the bracket)."""


class OptimizerError(GreyModelError):
    """Initial-value optimisation did not converge."""


class ConfigError(GreyModelError):
    """Invalid configuration (inconsistent options, too few samples, ...)."""


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    """A sampled multivariate trajectory.

    ``times`` holds strictly increasing stamps (arbitrary units) and
    ``values`` is an (n, d) matrix whose row k is the observation at
    ``times[k]``.  One-dimensional ``values`` are promoted to a single
    column.  Fitting routines impose their own (stricter) length
    requirements; the type itself only needs one sample.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _readonly(self.times)
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2:
            raise ValueError("times must be 1-d and values 2-d")
        if times.size != values.shape[0]:
            raise ValueError("times and values disagree on sample count")
        if times.size < 1:
            raise ValueError("need at least one sample")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise ValueError("times and values must be finite")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def spacings(self) -> np.ndarray:
        """Inter-sample spacings h_k = t_k - t_{k-1} for k = 2..n (n-1 values)."""
        return np.diff(self.times)


# ---------------------------------------------------------------------------
# Nonlinear bases
# ---------------------------------------------------------------------------

class NonlinearBasis:
    """A vector of nonlinear monomials N(y): R^d -> R^p with analytic Jacobian."""

    dimension: int
    size: int

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, y: np.ndarray) -> np.ndarray:
        """The (p, d) Jacobian dN/dy at y."""
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialUnivariate(NonlinearBasis):
    """N(y) = [y^2, y^3, ..., y^max_degree] for a scalar state (p = max_degree - 1)."""

    max_degree: int

    def __post_init__(self):
        if self.max_degree < 2:
            raise ValueError("max_degree must be >= 2")
        object.__setattr__(self, "_exponents", np.arange(2, self.max_degree + 1))

    @property
    def dimension(self) -> int:
        return 1

    @property
    def size(self) -> int:
        return self.max_degree - 1

    def evaluate(self, y):
        return float(y[0]) ** self._exponents

    def jacobian(self, y):
        e = self._exponents
        return (e * float(y[0]) ** (e - 1)).reshape(self.size, 1)


@dataclass(frozen=True)
class PowerUnivariate(NonlinearBasis):
    """N(y) = [y^gamma] for a scalar state; y must be positive unless gamma is integer."""

    gamma: float

    @property
    def dimension(self) -> int:
        return 1

    @property
    def size(self) -> int:
        return 1

    def _check_domain(self, v: float):
        if v <= 0.0 and not float(self.gamma).is_integer():
            raise DomainError(
                f"power basis with gamma={self.gamma} requires a positive argument, got {v}"
            )

    def evaluate(self, y):
        v = float(y[0])
        self._check_domain(v)
        return np.array([v ** self.gamma])

    def jacobian(self, y):
        v = float(y[0])
        self._check_domain(v)
        return np.array([[self.gamma * v ** (self.gamma - 1.0)]])


@dataclass(frozen=True)
class QuadraticMultivariate(NonlinearBasis):
    """All p = d(d+1)/2 quadratic monomials y_i * y_j, i <= j.

    The ordering is lexicographic in (i, j): for d = 2 the basis reads
    [y1^2, y1*y2, y2^2].  This fixed layout is what makes the change-of-basis
    matrices used by the one-step estimator unambiguous.
    """

    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("quadratic multivariate basis requires d >= 2")
        pairs = [(i, j) for i in range(self.d) for j in range(i, self.d)]
        ii = np.array([i for i, _ in pairs])
        jj = np.array([j for _, j in pairs])
        object.__setattr__(self, "pairs", tuple(pairs))
        object.__setattr__(self, "_ii", ii)
        object.__setattr__(self, "_jj", jj)

    @property
    def dimension(self) -> int:
        return self.d

    @property
    def size(self) -> int:
        return self.d * (self.d + 1) // 2

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return y[self._ii] * y[self._jj]

    def jacobian(self, y):
        y = np.asarray(y, dtype=float)
        jac = np.zeros((self.size, self.d))
        rows = np.arange(self.size)
        # i == j rows accumulate twice, giving the correct 2*y_i diagonal entry
        np.add.at(jac, (rows, self._ii), y[self._jj])
        np.add.at(jac, (rows, self._jj), y[self._ii])
        return jac


def evaluate_basis(basis: Optional[NonlinearBasis], y) -> np.ndarray:
    """Evaluate N(y) in the basis' fixed monomial order (empty for basis=None)."""
    if basis is None:
        return np.zeros(0)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size != basis.dimension:
        raise ValueError(f"state has size {y.size}, basis expects {basis.dimension}")
    if not np.all(np.isfinite(y)):
        raise ValueError("state must be finite")
    return basis.evaluate(y)


def basis_jacobian(basis: Optional[NonlinearBasis], y) -> np.ndarray:
    """The (p, d) Jacobian of the basis at y (0 x d for basis=None)."""
    if basis is None:
        return np.zeros((0, np.atleast_1d(y).size))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return basis.jacobian(y)


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

def _as_mask_tuple(mask, shape, name):
    arr = np.asarray(mask, dtype=bool)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return tuple(tuple(bool(v) for v in row) for row in arr)


@dataclass(frozen=True)
class ModelSpec:
    """Structural shape of a model in the unified first-order family.

    dy/dt = theta_L y + theta_N N(y) + beta

    ``basis`` may be None for the purely linear family (p = 0).
    ``include_linear=False`` drops the theta_L y term, which is how the
    no-linear-term power family (e.g. the INGM yearly model) is expressed.

    ``theta_L_mask`` / ``theta_N_mask`` mark coefficients as free (True) or
    structurally zero (False); None leaves every coefficient free.  This is
    how structured members of the family, such as the two-species interaction
    model with diagonal linear block and cross terms only, are expressed for
    estimation.  Simulation ignores masks (the parameter values carry the
    zeros themselves).
    """

    dimension: int
    basis: Optional[NonlinearBasis]
    include_constant: bool = False
    include_linear: bool = True
    theta_L_mask: Optional[tuple] = None
    theta_N_mask: Optional[tuple] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.basis is not None and self.basis.dimension != self.dimension:
            raise ValueError(
                f"basis dimension {self.basis.dimension} != spec dimension {self.dimension}"
            )
        d = self.dimension
        if self.theta_L_mask is not None:
            object.__setattr__(self, "theta_L_mask",
                               _as_mask_tuple(self.theta_L_mask, (d, d), "theta_L_mask"))
        if self.theta_N_mask is not None:
            object.__setattr__(self, "theta_N_mask",
                               _as_mask_tuple(self.theta_N_mask, (d, self.p), "theta_N_mask"))

    @property
    def p(self) -> int:
        return 0 if self.basis is None else self.basis.size

    @property
    def has_masks(self) -> bool:
        return self.theta_L_mask is not None or self.theta_N_mask is not None

    def linear_mask(self) -> np.ndarray:
        """(d, d) free-coefficient mask for the linear block."""
        if self.theta_L_mask is None:
            return np.ones((self.dimension, self.dimension), dtype=bool)
        return np.array(self.theta_L_mask, dtype=bool)

    def nonlinear_mask(self) -> np.ndarray:
        """(d, p) free-coefficient mask for the nonlinear block."""
        if self.theta_N_mask is None:
            return np.ones((self.dimension, self.p), dtype=bool)
        return np.array(self.theta_N_mask, dtype=bool)

    @property
    def n_regressors(self) -> int:
        """Column count of the two-step design: linear + nonlinear + constant."""
        cols = self.p
        if self.include_linear:
            cols += self.dimension
        if self.include_constant:
            cols += 1
        return cols


def verhulst_spec() -> ModelSpec:
    """Scalar logistic family dy/dt = a*y + b*y^2."""
    return ModelSpec(1, PolynomialUnivariate(2))


def polynomial_spec(max_degree: int, include_constant: bool = False) -> ModelSpec:
    """Scalar polynomial family dy/dt = a*y + sum_m b_m y^(m+1) (+ beta)."""
    return ModelSpec(1, PolynomialUnivariate(max_degree), include_constant)


def power_spec(gamma: float, include_constant: bool = False,
               include_linear: bool = True) -> ModelSpec:
    """Scalar power family dy/dt = a*y + b*y^gamma (+ beta)."""
    return ModelSpec(1, PowerUnivariate(gamma), include_constant, include_linear)


def quadratic_spec(d: int) -> ModelSpec:
    """d-dimensional family with all quadratic interaction terms."""
    return ModelSpec(d, QuadraticMultivariate(d))


def lotka_volterra_spec() -> ModelSpec:
    """Structured two-species interaction model.

    dy1/dt = a1 y1 + c1 y1 y2,  dy2/dt = a2 y2 + c2 y1 y2: the linear block is
    diagonal and only the cross term of the quadratic basis is free.
    """
    basis = QuadraticMultivariate(2)
    cross = basis.pairs.index((0, 1))
    theta_N_mask = np.zeros((2, basis.size), dtype=bool)
    theta_N_mask[:, cross] = True
    return ModelSpec(2, basis, theta_L_mask=np.eye(2, dtype=bool),
                     theta_N_mask=theta_N_mask)


def linear_spec(include_constant: bool = True) -> ModelSpec:
    """Scalar linear family dy/dt = a*y + beta (no nonlinear block)."""
    return ModelSpec(1, None, include_constant)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterSet:
    """Structural parameters plus initial value, in grey or reduced form.

    Grey form: ``eta`` is the initial value of the cumulative state y(t1) and
    ``beta`` the constant term (None means zero).

    Reduced form: ``eta`` is the shared offset of the running integral
    (y(t) = eta + int x) and, by the shared-initial-value convention used for
    estimation, also the default initial state.  ``eta_x`` overrides the
    initial state when the reduced form stems from a grey model whose constant
    term makes the two differ; None means eta.
    """

    theta_L: np.ndarray
    theta_N: np.ndarray
    eta: np.ndarray
    beta: Optional[np.ndarray] = None
    eta_x: Optional[np.ndarray] = None
    form: str = GREY_FORM

    def __post_init__(self):
        theta_L = _readonly(np.atleast_2d(self.theta_L))
        theta_N = _readonly(np.atleast_2d(self.theta_N))
        eta = _readonly(np.atleast_1d(self.eta))
        d = eta.size
        if theta_L.shape != (d, d):
            raise ValueError(f"theta_L must be ({d}, {d}), got {theta_L.shape}")
        if theta_N.shape[0] != d:
            raise ValueError(f"theta_N must have {d} rows, got {theta_N.shape}")
        if self.form not in (GREY_FORM, REDUCED_FORM):
            raise ValueError(f"unknown form {self.form!r}")
        beta = self.beta
        if beta is not None:
            beta = _readonly(np.atleast_1d(beta))
            if beta.shape != (d,):
                raise ValueError("beta must be a d-vector")
        eta_x = self.eta_x
        if eta_x is not None:
            eta_x = _readonly(np.atleast_1d(eta_x))
            if eta_x.shape != (d,):
                raise ValueError("eta_x must be a d-vector")
        for name, arr in (("theta_L", theta_L), ("theta_N", theta_N), ("eta", eta)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "theta_L", theta_L)
        object.__setattr__(self, "theta_N", theta_N)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "eta_x", eta_x)

    @property
    def d(self) -> int:
        return self.eta.size

    @property
    def p(self) -> int:
        return self.theta_N.shape[1]

    def beta_or_zero(self) -> np.ndarray:
        return np.zeros(self.d) if self.beta is None else self.beta

    def initial_state(self) -> np.ndarray:
        """Initial value of the original (non-cumulative) state."""
        if self.form != REDUCED_FORM:
            raise ValueError("initial_state is defined for the reduced form")
        return self.eta if self.eta_x is None else self.eta_x


def grey_to_reduced(params: ParameterSet, spec: ModelSpec) -> ParameterSet:
    """Convert grey-form parameters to the equivalent reduced form.

    The integral offset stays at the grey initial value eta, while the state
    initial value eta_x = theta_L eta + theta_N N(eta) + beta is carried
    explicitly so the conversion round-trips exactly.
    """
    if params.form != GREY_FORM:
        raise ValueError("expected grey-form parameters")
    n_eta = evaluate_basis(spec.basis, params.eta)
    eta_x = params.theta_L @ params.eta + params.theta_N @ n_eta + params.beta_or_zero()
    return ParameterSet(params.theta_L, params.theta_N, params.eta,
                        eta_x=eta_x, form=REDUCED_FORM)


def reduced_to_grey(params: ParameterSet, spec: ModelSpec) -> ParameterSet:
    """Convert reduced-form parameters back to grey form.

    The constant term absorbs the difference between the state initial value
    and what the structural terms produce at eta:
    beta = eta_x - theta_L eta - theta_N N(eta).
    """
    if params.form != REDUCED_FORM:
        raise ValueError("expected reduced-form parameters")
    n_eta = evaluate_basis(spec.basis, params.eta)
    beta = params.initial_state() - params.theta_L @ params.eta - params.theta_N @ n_eta
    return ParameterSet(params.theta_L, params.theta_N, params.eta,
                        beta=beta, form=GREY_FORM)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """An estimated model: parameters, residuals and solver diagnostics."""

    spec: ModelSpec
    params: ParameterSet
    method: str
    residual_matrix: np.ndarray        # (n-1, d)
    condition_estimate: float
    times: np.ndarray                  # training grid, kept for forecasting

    def __post_init__(self):
        object.__setattr__(self, "residual_matrix", _readonly(self.residual_matrix))
        object.__setattr__(self, "times", _readonly(self.times))


@dataclass(frozen=True)
class Forecast:
    """Fitted plus forecast values of the original series on an extended grid."""

    times: np.ndarray                  # (n + r,)
    fitted_and_forecast: np.ndarray    # (n + r, d)
    horizon: int
    blown_up: bool = False
    blowup_index: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "fitted_and_forecast", _readonly(self.fitted_and_forecast))
