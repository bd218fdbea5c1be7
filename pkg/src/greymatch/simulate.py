"""Synthetic data generation, noise injection, and the Monte Carlo harness.

Replications are driven by per-replication random streams derived from
(seed, replication index), so serial and parallel schedules produce identical
reports.  Gaussian draws use an explicit Box-Muller transform on top of the
PCG64 bit stream to keep runs reproducible across platforms.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .core import (
    BlowUpError,
    ConfigError,
    DomainError,
    FitResult,
    GreyModelError,
    METHOD_GREY_TWOSTEP,
    METHOD_INTEGRAL_MATCHING,
    ModelSpec,
    OptimizerError,
    ParameterSet,
    QuadraticMultivariate,
    REDUCED_FORM,
    RootSearchError,
    SingularDesignError,
    TimeSeries,
    lotka_volterra_spec,
    verhulst_spec,
)
from .grey_twostep import GreyFitConfig, fit_grey, forecast_grey
from .integral_matching import fit_matching, forecast_matching
from .metrics import rmse
from .ode import solve_reduced

KNOWN_ESTIMATORS = (METHOD_GREY_TWOSTEP, METHOD_INTEGRAL_MATCHING)

STATUS_OK = "ok"
STATUS_BLOW_UP = "blow_up"
STATUS_SINGULAR = "singular_design"
STATUS_DOMAIN = "domain_error"
STATUS_INITIAL = "initial_value_error"
STATUS_ERROR = "error"

REPORT_COLUMNS = ("scenario_id", "estimator", "replication", "name", "value", "status")
SUMMARY_COLUMNS = ("scenario_id", "estimator", "name", "count", "failures",
                   "min", "q1", "median", "q3", "max", "mean", "stddev")


# ---------------------------------------------------------------------------
# Configuration and report containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """One Monte Carlo scenario: a true model, a sampling grid, and noise.

    The grid is t = 0, h, 2h, ... with n = floor(T/h) + 1 samples unless ``n``
    is given explicitly (the noise sweep fixes n = 501 at h = 0.01, which runs
    the grid out to T = 5 while the size sweep stops at T = 4; both setups are
    kept exactly as stated rather than reconciled).

    ``grey_initial_values`` seeds the two-step solver with fixed initial
    values instead of the noisy first cumulative point; supplying the true
    initial condition is the documented workaround for the two-dimensional
    system, whose trajectories otherwise blow up from noisy seeds.
    """

    scenario_id: str
    spec: ModelSpec
    truth: ParameterSet
    T: float
    h: float
    noise_level: float
    replications: int
    seed: int
    n: Optional[int] = None
    estimators: Tuple[str, ...] = KNOWN_ESTIMATORS
    grey_initial_values: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.truth.form != REDUCED_FORM:
            raise ConfigError("scenario truth must be in reduced form")
        if self.noise_level < 0.0:
            raise ConfigError("noise_level must be >= 0")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.h <= 0.0 or self.T <= 0.0:
            raise ConfigError("T and h must be positive")
        for estimator in self.estimators:
            if estimator not in KNOWN_ESTIMATORS:
                raise ConfigError(f"unknown estimator {estimator!r}")
        if self.grey_initial_values is not None:
            object.__setattr__(self, "grey_initial_values",
                               tuple(float(v) for v in self.grey_initial_values))

    @property
    def n_samples(self) -> int:
        if self.n is not None:
            return self.n
        return int(math.floor(self.T / self.h + 1e-9)) + 1

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.h


@dataclass(frozen=True)
class Record:
    """One long-format result row."""

    scenario_id: str
    estimator: str
    replication: int
    name: str
    value: float
    status: str


@dataclass(frozen=True)
class MonteCarloReport:
    """All records of one scenario plus the scenario itself."""

    scenario: ScenarioConfig
    records: Tuple[Record, ...]

    def values(self, estimator: str, name: str) -> np.ndarray:
        """Successful estimates of one quantity, in replication order."""
        return np.array([r.value for r in self.records
                         if r.estimator == estimator and r.name == name
                         and r.status == STATUS_OK])

    def failure_count(self, estimator: str) -> int:
        return sum(1 for r in self.records
                   if r.estimator == estimator and r.status != STATUS_OK)


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

def _rng(seed_parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_parts)))


def _standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller gaussians from the uniform bit stream (platform-stable)."""
    count = int(np.prod(shape))
    half = (count + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(1.0 - u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
    return z.reshape(shape)


def generate_clean(config: ScenarioConfig) -> TimeSeries:
    """Noise-free trajectory of the true reduced model on the scenario grid."""
    times = config.times()
    traj = solve_reduced(config.spec, config.truth, times)
    if traj.blown_up:
        raise ConfigError("the true model blows up on the requested grid")
    return TimeSeries(times, traj.states[:, :config.spec.dimension])


def _noise_sigmas(clean: TimeSeries, noise_level: float) -> np.ndarray:
    # population variance of the clean signal, per component
    return np.sqrt(noise_level * clean.values.var(axis=0))


def add_noise(clean: TimeSeries, noise_level: float, seed) -> TimeSeries:
    """Add i.i.d. Gaussian noise with variance = noise_level * var(signal).

    ``noise_level`` is a fraction (0.10 for a 10% noise level); 0 returns the
    series unchanged.  The same seed reproduces the same draw bit for bit.
    """
    if noise_level == 0.0:
        return clean
    rng = _rng(seed)
    noise = _standard_normal(rng, clean.values.shape) * _noise_sigmas(clean, noise_level)
    return TimeSeries(clean.times, clean.values + noise)


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------

def common_parameters(fit: FitResult) -> List[Tuple[str, float]]:
    """Map a fit onto the shared comparison parameterization.

    Scalar models report (a, b, eta) where b is the leading nonlinear
    coefficient in grey/unified form; two-dimensional quadratic models report
    the interaction system (a1, b1, a2, b2, eta1, eta2) with b_i the negated
    cross-term coefficients.
    """
    params = fit.params
    d = fit.spec.dimension
    if d == 1:
        out = [("a", float(params.theta_L[0, 0]))]
        if params.p > 0:
            out.append(("b", float(params.theta_N[0, 0])))
        out.append(("eta", float(params.eta[0])))
        return out
    if d == 2 and isinstance(fit.spec.basis, QuadraticMultivariate):
        cross = fit.spec.basis.pairs.index((0, 1))
        return [
            ("a1", float(params.theta_L[0, 0])),
            ("b1", float(-params.theta_N[0, cross])),
            ("a2", float(params.theta_L[1, 1])),
            ("b2", float(-params.theta_N[1, cross])),
            ("eta1", float(params.eta[0])),
            ("eta2", float(params.eta[1])),
        ]
    raise ConfigError("no common parameterization for this model family")


def _classify_failure(exc: GreyModelError) -> str:
    if isinstance(exc, SingularDesignError):
        return STATUS_SINGULAR
    if isinstance(exc, BlowUpError):
        return STATUS_BLOW_UP
    if isinstance(exc, DomainError):
        return STATUS_DOMAIN
    if isinstance(exc, (RootSearchError, OptimizerError)):
        return STATUS_INITIAL
    return STATUS_ERROR


def _run_estimator(estimator: str, noisy: TimeSeries, config: ScenarioConfig,
                   rep: int) -> List[Record]:
    sid = config.scenario_id
    try:
        if estimator == METHOD_GREY_TWOSTEP:
            grey_config = GreyFitConfig(initial_values=config.grey_initial_values)
            fit = fit_grey(noisy, config.spec, grey_config)
            fitted = forecast_grey(fit, 0, grey_config)
        else:
            fit = fit_matching(noisy, config.spec)
            fitted = forecast_matching(fit, 0)
        if fitted.blown_up:
            raise BlowUpError("fitted trajectory blew up on the sample grid")
        fit_rmse = rmse(fitted.fitted_and_forecast, noisy.values)
    except GreyModelError as exc:
        status = _classify_failure(exc)
        return [Record(sid, estimator, rep, "failure", float("nan"), status)]
    records = [Record(sid, estimator, rep, name, value, STATUS_OK)
               for name, value in common_parameters(fit)]
    records.append(Record(sid, estimator, rep, "rmse", fit_rmse, STATUS_OK))
    return records


def _replication_records(config: ScenarioConfig, clean: TimeSeries,
                         rep: int) -> List[Record]:
    noisy = add_noise(clean, config.noise_level, (config.seed, rep))
    records: List[Record] = []
    for estimator in config.estimators:
        records.extend(_run_estimator(estimator, noisy, config, rep))
    return records


def _replication_worker(args) -> List[Record]:
    return _replication_records(*args)


def run_monte_carlo(config: ScenarioConfig, workers: int = 1) -> MonteCarloReport:
    """Run all replications of one scenario.

    Per-replication failures (singular designs, trajectory blow-ups, ...)
    become failure-marker records; they never abort the batch.  ``workers``
    > 1 fans replications out to processes without changing the result.
    """
    clean = generate_clean(config)
    reps = range(config.replications)
    if workers > 1:
        chunk = max(1, config.replications // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_replication_worker,
                                    [(config, clean, rep) for rep in reps],
                                    chunksize=chunk))
    else:
        per_rep = [_replication_records(config, clean, rep) for rep in reps]
    records = tuple(record for rep_records in per_rep for record in rep_records)
    return MonteCarloReport(config, records)


# ---------------------------------------------------------------------------
# Summaries and CSV export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    scenario_id: str
    estimator: str
    name: str
    count: int
    failures: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    stddev: float


def summarize(report: MonteCarloReport) -> List[SummaryRow]:
    """Quantile summary per (estimator, quantity) over successful replications."""
    if not report.records:
        raise ValueError("cannot summarize an empty report")
    rows: List[SummaryRow] = []
    for estimator in report.scenario.estimators:
        failures = report.failure_count(estimator)
        names = []
        for record in report.records:
            if (record.estimator == estimator and record.status == STATUS_OK
                    and record.name not in names):
                names.append(record.name)
        for name in names:
            values = report.values(estimator, name)
            q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
            stddev = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
            rows.append(SummaryRow(
                report.scenario.scenario_id, estimator, name,
                int(values.size), failures,
                float(values.min()), float(q1), float(med), float(q3),
                float(values.max()), float(values.mean()), stddev,
            ))
    return rows


def write_report_csv(reports: Iterable[MonteCarloReport], path) -> None:
    """Long-format CSV (scenario_id, estimator, replication, name, value, status)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(REPORT_COLUMNS) + "\n")
        for report in reports:
            for r in report.records:
                handle.write(f"{r.scenario_id},{r.estimator},{r.replication},"
                             f"{r.name},{r.value!r},{r.status}\n")


def write_summary_csv(rows: Iterable[SummaryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            handle.write(f"{row.scenario_id},{row.estimator},{row.name},"
                         f"{row.count},{row.failures},{row.min!r},{row.q1!r},"
                         f"{row.median!r},{row.q3!r},{row.max!r},{row.mean!r},"
                         f"{row.stddev!r}\n")


# ---------------------------------------------------------------------------
# Bundled scenarios
# ---------------------------------------------------------------------------

def verhulst_truth() -> Tuple[ModelSpec, ParameterSet]:
    """Scalar logistic truth: growth 1.2, interaction -1 (grey-form -0.5), start 0.4."""
    spec = verhulst_spec()
    truth = ParameterSet([[1.2]], [[-0.5]], [0.4], form=REDUCED_FORM)
    return spec, truth


def lotka_volterra_truth() -> Tuple[ModelSpec, ParameterSet]:
    """Two-species truth a1=1.2, b1=0.3, a2=-1.0, b2=-0.4, start (5, 2/3)."""
    spec = lotka_volterra_spec()
    theta_L = [[1.2, 0.0], [0.0, -1.0]]
    theta_N = [[0.0, -0.3, 0.0], [0.0, 0.4, 0.0]]
    truth = ParameterSet(theta_L, theta_N, [5.0, 2.0 / 3.0], form=REDUCED_FORM)
    return spec, truth


def verhulst_n_sweep(replications: int = 500, seed: int = 20210401) -> List[ScenarioConfig]:
    """Sample-size sweep at 10% noise: h in {0.40, 0.20, 0.08, 0.04} over [0, 4]."""
    spec, truth = verhulst_truth()
    configs = []
    for i, h in enumerate((0.40, 0.20, 0.08, 0.04)):
        n = int(math.floor(4.0 / h + 1e-9)) + 1
        configs.append(ScenarioConfig(
            scenario_id=f"verhulst-n{n}", spec=spec, truth=truth,
            T=4.0, h=h, noise_level=0.10,
            replications=replications, seed=seed + i,
        ))
    return configs


def verhulst_noise_sweep(replications: int = 500, seed: int = 20210402) -> List[ScenarioConfig]:
    """Noise sweep at n = 501 (h = 0.01): levels 10, 15, 20, 25 percent."""
    spec, truth = verhulst_truth()
    return [
        ScenarioConfig(
            scenario_id=f"verhulst-noise{int(level * 100)}", spec=spec, truth=truth,
            T=5.0, h=0.01, n=501, noise_level=level,
            replications=replications, seed=seed + i,
        )
        for i, level in enumerate((0.10, 0.15, 0.20, 0.25))
    ]


def lv_noise_sweep(replications: int = 500, seed: int = 20210403,
                   true_grey_initials: bool = True) -> List[ScenarioConfig]:
    """Two-species noise sweep at n = 501 (T = 5): levels 4, 8, 12, 16 percent.

    The two-step estimator is seeded with the true initial condition by
    default; noisy seeds make its trajectories blow up.
    """
    spec, truth = lotka_volterra_truth()
    initials = tuple(truth.eta) if true_grey_initials else None
    return [
        ScenarioConfig(
            scenario_id=f"lv-noise{int(level * 100)}", spec=spec, truth=truth,
            T=5.0, h=0.01, noise_level=level,
            replications=replications, seed=seed + i,
            grey_initial_values=initials,
        )
        for i, level in enumerate((0.04, 0.08, 0.12, 0.16))
    ]


def lv_n_sweep(replications: int = 500, seed: int = 20210404,
               true_grey_initials: bool = True) -> List[ScenarioConfig]:
    """Two-species size sweep at 4% noise: n in {21, 51, 101, 501} over [0, 5]."""
    spec, truth = lotka_volterra_truth()
    initials = tuple(truth.eta) if true_grey_initials else None
    configs = []
    for i, n in enumerate((21, 51, 101, 501)):
        configs.append(ScenarioConfig(
            scenario_id=f"lv-n{n}", spec=spec, truth=truth,
            T=5.0, h=5.0 / (n - 1), noise_level=0.04,
            replications=replications, seed=seed + i,
            grey_initial_values=initials,
        ))
    return configs


BUNDLED_SCENARIOS = {
    "verhulst-n-sweep": verhulst_n_sweep,
    "verhulst-noise-sweep": verhulst_noise_sweep,
    "lv-noise-sweep": lv_noise_sweep,
    "lv-n-sweep": lv_n_sweep,
}
