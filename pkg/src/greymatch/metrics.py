"""Error criteria and train/test splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import TimeSeries


def rmse(fitted, actual) -> float:
    """Root-mean-square error with 1/(n-1) normalization over all n points."""
    fitted = np.asarray(fitted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if fitted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {fitted.shape} vs {actual.shape}")
    n = fitted.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    return float(np.sqrt(np.sum((fitted - actual) ** 2) / (n - 1)))


def ape(fitted, actual) -> np.ndarray:
    """Per-point absolute percentage errors, |x_hat - x| / |x| * 100."""
    fitted = np.asarray(fitted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if fitted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {fitted.shape} vs {actual.shape}")
    if np.any(actual == 0.0):
        raise ValueError("APE is undefined where the actual value is zero")
    return np.abs(fitted - actual) / np.abs(actual) * 100.0


def mape(fitted, actual) -> float:
    """Mean absolute percentage error (arithmetic mean of the APEs)."""
    return float(np.mean(ape(fitted, actual)))


def train_test_split(ts: TimeSeries, split_index: int) -> Tuple[TimeSeries, TimeSeries]:
    """Split into a contiguous prefix of ``split_index`` samples and the rest."""
    if not 1 < split_index < ts.n:
        raise ValueError(f"split_index must lie strictly between 1 and {ts.n}")
    train = TimeSeries(ts.times[:split_index], ts.values[:split_index])
    test = TimeSeries(ts.times[split_index:], ts.values[split_index:])
    return train, test


@dataclass(frozen=True)
class EvaluationReport:
    """Per-point APEs plus segment MAPEs and the training-segment RMSE."""

    ape_values: np.ndarray          # (n, d) percentages
    mape_train: float
    mape_test: Optional[float]
    rmse: float
    n_train: int
    n_test: int


def evaluation_report(actual: TimeSeries, predicted: np.ndarray,
                      split_index: Optional[int] = None) -> EvaluationReport:
    """Score predictions against a series, optionally split into train/test.

    ``predicted`` must cover all n samples of ``actual``; without a split the
    whole series counts as the training segment.  The RMSE is computed over
    the training segment.
    """
    predicted = np.asarray(predicted, dtype=float)
    if predicted.ndim == 1:
        predicted = predicted[:, None]
    if predicted.shape != actual.values.shape:
        raise ValueError(
            f"predictions have shape {predicted.shape}, series has {actual.values.shape}"
        )
    ape_values = ape(predicted, actual.values)
    if split_index is None:
        split_index = actual.n
    elif not 1 < split_index <= actual.n:
        raise ValueError(f"split_index must lie in (1, {actual.n}]")
    mape_train = float(np.mean(ape_values[:split_index]))
    n_test = actual.n - split_index
    mape_test = float(np.mean(ape_values[split_index:])) if n_test > 0 else None
    fit_rmse = rmse(predicted[:split_index], actual.values[:split_index])
    return EvaluationReport(ape_values, mape_train, mape_test, fit_rmse,
                            split_index, n_test)
