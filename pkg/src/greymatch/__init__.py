"""Nonlinear grey system modelling: two-step cumulative-sum estimation and
one-step integral matching, with a Monte Carlo benchmark harness."""

from .core import (
    BlowUpError,
    ConfigError,
    DomainError,
    FitResult,
    Forecast,
    GREY_FORM,
    GreyModelError,
    METHOD_GREY_TWOSTEP,
    METHOD_INTEGRAL_MATCHING,
    METHOD_INTEGRAL_MATCHING_POWER,
    ModelSpec,
    OptimizerError,
    ParameterSet,
    PolynomialUnivariate,
    PowerUnivariate,
    QuadraticMultivariate,
    REDUCED_FORM,
    RootSearchError,
    SingularDesignError,
    TimeSeries,
    evaluate_basis,
    grey_to_reduced,
    linear_spec,
    lotka_volterra_spec,
    polynomial_spec,
    power_spec,
    quadratic_spec,
    reduced_to_grey,
    verhulst_spec,
)
from .transform import CusumSeries, cusum, inverse_cusum, trapezoid_cumulative
from .ode import (
    OVERFLOW_GUARD,
    Trajectory,
    default_substeps,
    grey_rhs,
    reduced_augmented_rhs,
    rk4_integrate,
    solve_grey,
    solve_reduced,
    verhulst_closed_form_x,
    verhulst_closed_form_y,
)
from .grey_twostep import (
    FIX_FIRST,
    FIX_LAST,
    GreyFitConfig,
    RESIDUAL_CORRECTION,
    build_design_grey,
    extend_times,
    fit_grey,
    forecast_grey,
    least_squares_solve,
    select_initial,
)
from .integral_matching import (
    FAMILY_INGBM,
    FAMILY_INGM,
    TransformedParameters,
    build_design_matching,
    fit_matching,
    fit_matching_power,
    forecast_matching,
    gamma_line_search,
    polynomial_shift_coefficients,
    quadratic_shift_matrix,
    recover_parameters,
    transform_parameters,
)
from .metrics import (
    EvaluationReport,
    ape,
    evaluation_report,
    mape,
    rmse,
    train_test_split,
)
from .simulate import (
    BUNDLED_SCENARIOS,
    MonteCarloReport,
    Record,
    ScenarioConfig,
    SummaryRow,
    add_noise,
    common_parameters,
    generate_clean,
    lotka_volterra_truth,
    lv_n_sweep,
    lv_noise_sweep,
    run_monte_carlo,
    summarize,
    verhulst_n_sweep,
    verhulst_noise_sweep,
    verhulst_truth,
    write_report_csv,
    write_summary_csv,
)

__version__ = "0.1.0"
