"""Cumulative-sum operator, its inverse, and the trapezoidal integral proxy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSeries, _readonly


@dataclass(frozen=True)
class CusumSeries:
    """Weighted running sums y(t_k) of a time series, one column per variable."""

    times: np.ndarray
    cum_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "cum_values", _readonly(self.cum_values))

    @property
    def n(self) -> int:
        return self.times.size


def _cusum_weights(times: np.ndarray) -> np.ndarray:
    # first weight is 1 by convention, regardless of where the grid starts
    h = np.empty(times.size)
    h[0] = 1.0
    h[1:] = np.diff(times)
    return h


def cusum(ts: TimeSeries) -> CusumSeries:
    """y(t_k) = sum_{i<=k} h_i x(t_i) with h_1 = 1 and h_k = t_k - t_{k-1}."""
    h = _cusum_weights(ts.times)
    return CusumSeries(ts.times, np.cumsum(h[:, None] * ts.values, axis=0))


def inverse_cusum(ycum: CusumSeries) -> TimeSeries:
    """Recover the original series: x(t1) = y(t1), x(t_k) = (y(t_k) - y(t_{k-1})) / h_k."""
    y = ycum.cum_values
    x = np.empty_like(y)
    x[0] = y[0]
    if ycum.n > 1:
        h = np.diff(ycum.times)
        x[1:] = np.diff(y, axis=0) / h[:, None]
    return TimeSeries(ycum.times, x)


def trapezoid_cumulative(ts: TimeSeries) -> np.ndarray:
    """Trapezoid-rule approximation of int_{t1}^{t_k} x dt, per column.

    Row 1 is the empty integral (zero); row k accumulates
    h_i (x(t_{i-1}) + x(t_i)) / 2 for i = 2..k.  Sums are plain sequential
    accumulations; for the sample counts this package targets (n <= 1e4) the
    round-off is far below the discretization error.
    """
    x = ts.values
    out = np.zeros_like(x)
    if ts.n > 1:
        h = np.diff(ts.times)
        out[1:] = np.cumsum(0.5 * h[:, None] * (x[:-1] + x[1:]), axis=0)
    return out
