"""Ensemble reductions: MSD, complementary CDF, tail exponents and volatility ACF."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class _Block:
    start: int
    count: int
    sum_x2: np.ndarray
    sum_x4: np.ndarray
    samples: np.ndarray | None


@dataclass
class EnsembleAccumulator:
    """Mergeable second/fourth-moment sums over realizations.

    Partial sums are kept per block of consecutive realization indices and
    only combined, in index order, when read. Merging is therefore
    associative and commutative bit for bit, whatever order workers finish
    in. With ``keep_samples`` the absolute displacement at the last grid time
    is retained for every realization.
    """

    grid: np.ndarray
    keep_samples: bool = False
    _blocks: dict = field(default_factory=dict, repr=False)

    def add(self, start: int, values) -> "EnsembleAccumulator":
        """Add rows ``values[i]`` as realizations ``start + i``."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.grid):
            raise ValueError("values must have shape (realizations, grid points)")
        sq = values * values
        block = _Block(start, values.shape[0], sq.sum(axis=0), (sq * sq).sum(axis=0),
                       np.abs(values[:, -1]).copy() if self.keep_samples else None)
        self._insert(block)
        return self

    def _insert(self, block: _Block):
        end = block.start + block.count
        for other in self._blocks.values():
            if block.start < other.start + other.count and other.start < end:
                raise ValueError(f"realizations {block.start}..{end - 1} already accumulated")
        self._blocks[block.start] = block

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("cannot merge accumulators on different grids")
        merged = EnsembleAccumulator(np.asarray(self.grid),
                                     self.keep_samples and other.keep_samples)
        for block in list(self._blocks.values()) + list(other._blocks.values()):
            if not merged.keep_samples:
                block = _Block(block.start, block.count, block.sum_x2, block.sum_x4, None)
            merged._insert(block)
        return merged

    def _ordered(self):
        return [self._blocks[k] for k in sorted(self._blocks)]

    @property
    def count(self) -> int:
        return sum(b.count for b in self._blocks.values())

    def _total(self, attr):
        total = np.zeros(len(self.grid))
        for block in self._ordered():
            total = total + getattr(block, attr)
        return total

    @property
    def sum_x2(self) -> np.ndarray:
        return self._total("sum_x2")

    @property
    def sum_x4(self) -> np.ndarray:
        return self._total("sum_x4")

    @property
    def samples(self) -> np.ndarray:
        if not self.keep_samples:
            raise ValueError("accumulator was built without keep_samples")
        blocks = self._ordered()
        if not blocks:
            return np.empty(0)
        return np.concatenate([b.samples for b in blocks])


@dataclass(frozen=True)
class MsdCurve:
    t: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray


def msd(acc: EnsembleAccumulator) -> MsdCurve:
    """Ensemble mean of ``x(t)**2`` with standard errors from fourth moments."""
    n = acc.count
    if n < 2:
        raise EstimationError("MSD needs at least two realizations")
    m2 = acc.sum_x2 / n
    var = np.maximum(acc.sum_x4 / n - m2 * m2, 0.0) * n / (n - 1)
    return MsdCurve(np.asarray(acc.grid, dtype=float), m2, np.sqrt(var / n))


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int


def fit_loglog_slope(x, y, x_min=None, x_max=None) -> LogLogFit:
    """Least squares line through ``(ln x, ln y)`` restricted to ``[x_min, x_max]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.ones(x.shape, dtype=bool)
    if x_min is not None:
        mask &= x >= x_min
    if x_max is not None:
        mask &= x <= x_max
    x, y = x[mask], y[mask]
    if x.size < 3:
        raise EstimationError(f"need at least 3 points in the fit range, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise EstimationError("log-log fit needs positive values")
    if np.ptp(x) == 0:
        raise EstimationError("degenerate fit range")
    res = stats.linregress(np.log(x), np.log(y))
    return LogLogFit(float(res.slope), float(res.intercept), float(res.stderr), int(x.size))


def ccdf(samples):
    """Empirical ``P(X > x)`` at the distinct sample values, ascending in ``x``."""
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    n = samples.size
    if n == 0:
        raise EstimationError("ccdf of an empty sample")
    values, first = np.unique(samples, return_index=True)
    last = np.append(first[1:], n)
    return values, 1.0 - last / n


@dataclass(frozen=True)
class TailFit:
    beta_hat: float
    stderr: float
    method: str
    fit_range: tuple
    n_used: int


def hill_estimator(samples, k: int) -> TailFit:
    """Hill estimate of the tail exponent from the ``k`` largest samples.

    ``beta = k / sum_i ln(x_(n-i+1) / x_(n-k))`` with standard error
    ``beta / sqrt(k)``.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if k < 10 or k >= n:
        raise EstimationError(f"Hill estimator needs 10 <= k < n, got k={k}, n={n}")
    top = x[n - k:]
    threshold = x[n - k - 1]
    if threshold <= 0:
        raise EstimationError("Hill estimator needs positive order statistics")
    spacing = np.sum(np.log(top / threshold))
    if spacing <= 0:
        raise EstimationError("all top order statistics coincide")
    beta = k / spacing
    return TailFit(float(beta), float(beta / math.sqrt(k)), "hill",
                   (float(threshold), float(top[-1])), int(k))


def hill_default_k(n: int, fraction: float = 0.01) -> int:
    return max(10, int(round(fraction * n)))


def ccdf_regression(samples, x_min, x_max) -> TailFit:
    """Tail exponent as minus the log-log slope of the CCDF on ``[x_min, x_max]``."""
    x, p = ccdf(samples)
    keep = p > 0
    fit = fit_loglog_slope(x[keep], p[keep], x_min, x_max)
    if -fit.slope <= 0:
        raise EstimationError("CCDF is not decreasing in the fit range")
    return TailFit(-fit.slope, fit.stderr, "ccdf-regression",
                   (float(x_min), float(x_max)), fit.n_points)


@dataclass(frozen=True)
class VolAcf:
    lags: np.ndarray
    c_v: np.ndarray
    stderr: np.ndarray


def _lookup(grid, times):
    idx = np.searchsorted(grid, times)
    if np.any(idx >= grid.size) or not np.allclose(grid[np.minimum(idx, grid.size - 1)], times,
                                                    rtol=1e-12, atol=0.0):
        raise EstimationError("path grid must contain 0, every lag and every lag + window")
    return idx


def _cv(first, later, method):
    mu = first.mean()
    a = first - mu
    if method == "pearson":
        b = later - later.mean()
        norm = math.sqrt(np.dot(a, a) * np.dot(b, b))
    else:
        b = later - mu
        norm = np.dot(a, a)
    if norm == 0:
        raise EstimationError("zero variance of squared increments")
    return np.dot(a, b) / norm


def volatility_acf(paths, grid, window: float, lags, *, method: str = "pearson",
                   jackknife_blocks: int = 20) -> VolAcf:
    """Ensemble autocorrelation of squared increments over ``window``.

    ``paths`` holds one stationary path per row on ``grid``. For every lag
    ``tau`` the squared increment ``(p(tau + window) - p(tau))**2`` is
    correlated across the ensemble with the one at lag zero. ``method``
    ``"pearson"`` normalises by both standard deviations; ``"reference"``
    centres both windows on the lag-zero mean and divides by the lag-zero
    variance. Both give exactly 1 at lag zero. Errors are block jackknife.
    """
    paths = np.asarray(paths, dtype=float)
    grid = np.asarray(grid, dtype=float)
    lags = np.asarray(lags, dtype=float)
    if paths.ndim != 2 or paths.shape[1] != grid.size:
        raise ValueError("paths must have shape (ensemble, grid points)")
    n = paths.shape[0]
    if n < 100:
        raise EstimationError(f"volatility ACF needs at least 100 windows, got {n}")
    if method not in ("pearson", "reference"):
        raise ValueError(f"unknown normalisation {method!r}")
    start = _lookup(grid, lags)
    end = _lookup(grid, lags + window)
    base = _lookup(grid, np.array([0.0, window]))
    first = (paths[:, base[1]] - paths[:, base[0]]) ** 2
    squares = (paths[:, end] - paths[:, start]) ** 2

    def estimate(rows):
        return np.array([_cv(first[rows], squares[rows, j], method) for j in range(lags.size)])

    c_v = estimate(slice(None))
    blocks = np.array_split(np.arange(n), jackknife_blocks)
    loo = np.array([estimate(np.setdiff1d(np.arange(n), b)) for b in blocks])
    g = len(blocks)
    stderr = np.sqrt((g - 1) / g * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return VolAcf(lags, c_v, stderr)


def fit_acf_exponent(acf: VolAcf, lag_min, lag_max) -> LogLogFit:
    """Log-log fit of the positive part of ``C_V`` on ``[lag_min, lag_max]``; zeta is ``-slope``."""
    keep = acf.c_v > 0
    return fit_loglog_slope(acf.lags[keep], acf.c_v[keep], lag_min, lag_max)
