"""Event-driven exact simulation of order splitters.

Each trader alternates exponential rests and Pareto-distributed executions.
During an execution that started at ``t0`` with sign ``s`` the trader's
contribution is ``s * (t - t0)**delta``; on completion it is frozen at
``s * duration**delta``. Prices are evaluated in closed form at the requested
grid times, so results do not depend on the grid resolution.

Random variates are consumed three per cycle in the fixed order
``(rest, duration, sign)`` from a trader's :class:`~levy_impact.params.RngStream`.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import ModelParams, RngStream, sample_duration, sample_rest, sample_sign

UNIFORMS_PER_CYCLE = 3


class Phase(enum.Enum):
    RESTING = "resting"
    EXECUTING = "executing"


@dataclass
class TraderState:
    """Renewal state of one trader.

    This is the readable reference implementation of the dynamics; the
    compiled kernel below must agree with it exactly.
    """

    phase: Phase = Phase.RESTING
    phase_start: float = 0.0
    phase_duration: float = 0.0
    sign: int = 0
    x_completed: float = 0.0

    @property
    def phase_end(self) -> float:
        return self.phase_start + self.phase_duration

    def displacement(self, t: float, delta: float) -> float:
        if self.phase is Phase.EXECUTING:
            return self.x_completed + self.sign * (t - self.phase_start) ** delta
        return self.x_completed

    def start_execution(self, duration: float, sign: int) -> None:
        self.phase_start = self.phase_end
        self.phase = Phase.EXECUTING
        self.phase_duration = duration
        self.sign = sign

    def finish_execution(self, delta: float) -> None:
        self.x_completed += self.sign * self.phase_duration ** delta
        self.phase_start = self.phase_end
        self.phase = Phase.RESTING
        self.phase_duration = 0.0
        self.sign = 0

    def start_rest(self, rest: float) -> None:
        self.phase = Phase.RESTING
        self.phase_duration = rest


def trace_events(grid, rests, durations, signs, delta):
    """Displacement on ``grid`` for an explicit event sequence.

    The trader starts resting at ``t = 0``; cycle ``k`` is ``rests[k]``
    followed by an execution of ``durations[k]`` with sign ``signs[k]``.
    Once the sequence is exhausted the trader rests forever.
    """
    grid = np.asarray(grid, dtype=float)
    out = np.empty_like(grid)
    state = TraderState()
    events = list(zip(rests, durations, signs))
    k = 0
    state.start_rest(events[0][0] if events else math.inf)
    for g, t in enumerate(grid):
        while t >= state.phase_end:
            if state.phase is Phase.RESTING:
                _, duration, sign = events[k]
                state.start_execution(duration, sign)
            else:
                state.finish_execution(delta)
                k += 1
                state.start_rest(events[k][0] if k < len(events) else math.inf)
        out[g] = state.displacement(t, delta)
    return out


def events_from_uniforms(u, alpha, tau_r):
    """Split a raw uniform buffer into (rests, durations, signs) cycles."""
    u = np.asarray(u, dtype=float)
    n = u.size // UNIFORMS_PER_CYCLE
    u = u[: n * UNIFORMS_PER_CYCLE].reshape(n, UNIFORMS_PER_CYCLE)
    rests = sample_rest(1.0 - u[:, 0], tau_r)
    durations = sample_duration(1.0 - u[:, 1], alpha)
    signs = sample_sign(u[:, 2])
    return np.atleast_1d(rests), np.atleast_1d(durations), np.atleast_1d(signs)


@njit(cache=True, nogil=True)
def _trader_kernel(u, grid, alpha, delta, tau_r, sign_flip, out):
    """Fill ``out`` with the trader's displacement at ``grid``.

    Returns the number of uniforms consumed, or -1 if ``u`` ran out before
    the last grid time was reached.
    """
    n = grid.shape[0]
    inv_alpha = 1.0 / alpha
    t = 0.0
    x = 0.0
    g = 0
    i = 0
    while g < n:
        if i + 3 > u.shape[0]:
            return -1
        t_ini = t - tau_r * math.log(1.0 - u[i])
        duration = (1.0 - u[i + 1]) ** (-inv_alpha)
        sgn = -sign_flip if u[i + 2] < 0.5 else sign_flip
        i += 3
        t_fin = t_ini + duration
        while g < n and grid[g] < t_ini:
            out[g] = x
            g += 1
        while g < n and grid[g] < t_fin:
            out[g] = x + sgn * (grid[g] - t_ini) ** delta
            g += 1
        x += sgn * duration ** delta
        t = t_fin
    return i


def _buffer_size(params: ModelParams, horizon: float) -> int:
    cycle = params.tau_r + min(params.mean_duration, 1e300)
    cycles = int(1.25 * horizon / cycle) + 16
    return UNIFORMS_PER_CYCLE * cycles


def _check_grid(grid) -> np.ndarray:
    grid = np.ascontiguousarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be non-negative and strictly increasing")
    return grid


def _trader_path(params: ModelParams, grid: np.ndarray, stream: RngStream,
                 sign_flip: float = 1.0) -> np.ndarray:
    out = np.empty_like(grid)
    gen = stream.generator()
    u = gen.random(_buffer_size(params, grid[-1]))
    while _trader_kernel(u, grid, params.alpha, params.delta, params.tau_r,
                         sign_flip, out) < 0:
        # the extension continues the same stream, so the result does not
        # depend on the initial buffer size
        u = np.concatenate([u, gen.random(u.size)])
    return out


def simulate_trader(params: ModelParams, grid, stream: RngStream) -> np.ndarray:
    """Single-trader displacement ``x_j(t)`` on ``grid``, cold start at rest."""
    grid = _check_grid(grid)
    if grid[-1] > params.t_obs:
        raise ValueError(f"grid extends past t_obs={params.t_obs}")
    return _trader_path(params, grid, stream)


@dataclass(frozen=True)
class PricePath:
    grid: np.ndarray
    values: np.ndarray
    params: ModelParams
    stream_index: int


def _market_values(params, grid, stream, sign_flip=1.0):
    total = np.zeros_like(grid)
    for j in range(params.m_traders):
        total += _trader_path(params, grid, stream.child(j), sign_flip)
    return total


def simulate_market(params: ModelParams, grid, base_seed: int,
                    realization_index: int, *, sign_flip: bool = False) -> PricePath:
    """Total displacement of ``params.m_traders`` independent traders.

    Trader ``j`` of the realization draws from substream ``j`` of
    ``RngStream(base_seed, realization_index)``. ``sign_flip`` negates every
    sampled order sign.
    """
    grid = _check_grid(grid)
    if grid[-1] > params.t_obs:
        raise ValueError(f"grid extends past t_obs={params.t_obs}")
    stream = RngStream(base_seed, realization_index)
    values = _market_values(params, grid, stream, -1.0 if sign_flip else 1.0)
    return PricePath(grid, values, params, realization_index)


def default_burn_in(params: ModelParams) -> float:
    return 1e3 * max(1.0, params.tau_r, params.mean_duration)


def simulate_stationary_window(params: ModelParams, window_length: float, lag_max: float,
                               burn_in: float | None, stream: RngStream,
                               grid=None) -> PricePath:
    """Path over ``[0, lag_max + window_length]`` observed after a burn-in.

    The process runs from a cold start for ``burn_in`` time units; the
    returned path is re-origined so that time and displacement are both zero
    at the start of the window. Phases straddling the boundary carry over.
    ``grid`` defaults to unit spacing over the window.
    """
    if burn_in is None:
        burn_in = default_burn_in(params)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    span = lag_max + window_length
    if grid is None:
        grid = np.arange(0.0, math.floor(span) + 1.0)
    grid = _check_grid(grid)
    if grid[-1] > span:
        raise ValueError("grid extends past lag_max + window_length")
    absolute = burn_in + grid
    prepend = grid[0] > 0
    if prepend:
        absolute = np.concatenate([[burn_in], absolute])
    values = _market_values(params, absolute, stream)
    values = values - values[0]
    if prepend:
        values = values[1:]
    return PricePath(grid, values, params, stream.stream_index)


def realization_chunks(n: int, chunk_size: int):
    return [range(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def map_chunks(fn, n: int, chunk_size: int = 256, threads: int = 1):
    """Apply ``fn(indices)`` to fixed realization chunks, results in chunk order.

    Chunk boundaries depend only on ``n`` and ``chunk_size``, never on the
    worker count, so any reduction over the returned list is reproducible.
    """
    chunks = realization_chunks(n, chunk_size)
    if threads <= 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def ensemble_values(params: ModelParams, grid, seed: int, indices) -> np.ndarray:
    """Matrix of market paths, one row per realization index."""
    grid = _check_grid(grid)
    out = np.empty((len(indices), grid.size))
    for row, r in enumerate(indices):
        out[row] = _market_values(params, grid, RngStream(seed, r))
    return out


def stationary_values(params: ModelParams, grid, burn_in: float, seed: int,
                      indices) -> np.ndarray:
    grid = _check_grid(grid)
    out = np.empty((len(indices), grid.size))
    span = grid[-1]
    for row, r in enumerate(indices):
        out[row] = simulate_stationary_window(params, span, 0.0, burn_in,
                                              RngStream(seed, r), grid).values
    return out
