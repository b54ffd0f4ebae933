"""Model parameters, random streams and the inverse-CDF samplers.

Units are fixed so that the execution rate and the impact prefactor are both
one: a metaorder of duration ``D`` has volume ``D`` and moves the price by
``D**delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised for parameter tuples outside the model's validity range."""


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple ``(alpha, delta, tau_r, m_traders, t_obs)``.

    ``alpha`` is the tail exponent of metaorder durations, ``delta`` the impact
    exponent, ``tau_r`` the mean rest between metaorders, ``m_traders`` the
    number of independent order splitters and ``t_obs`` the observation
    horizon. ``alpha`` must lie in (1, 2) unless ``extended_range`` is set.
    """

    alpha: float
    delta: float
    tau_r: float
    m_traders: int = 1
    t_obs: float = 1.0
    extended_range: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("alpha", "delta", "tau_r", "t_obs"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
        if self.extended_range:
            if self.alpha <= 0:
                raise ParameterError(f"alpha must be positive, got {self.alpha}")
        elif not 1.0 < self.alpha < 2.0:
            raise ParameterError(
                f"alpha={self.alpha} outside (1, 2); set extended_range to allow it"
            )
        if not 0.0 < self.delta <= 1.0:
            raise ParameterError(f"delta must satisfy 0 < delta <= 1, got {self.delta}")
        if self.tau_r <= 0:
            raise ParameterError(f"tau_r must be positive, got {self.tau_r}")
        if isinstance(self.m_traders, bool) or int(self.m_traders) != self.m_traders \
                or self.m_traders < 1:
            raise ParameterError(f"m_traders must be a positive integer, got {self.m_traders}")
        if self.t_obs <= 0:
            raise ParameterError(f"t_obs must be positive, got {self.t_obs}")

    @property
    def mean_duration(self) -> float:
        """Mean metaorder duration ``alpha / (alpha - 1)``; infinite for alpha <= 1."""
        if self.alpha <= 1:
            return math.inf
        return self.alpha / (self.alpha - 1.0)

    def replace(self, **changes) -> "ModelParams":
        data = dict(alpha=self.alpha, delta=self.delta, tau_r=self.tau_r,
                    m_traders=self.m_traders, t_obs=self.t_obs,
                    extended_range=self.extended_range)
        data.update(changes)
        return ModelParams(**data)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_index)``.

    Each stream is a Philox generator whose 128-bit key is the pair
    ``(seed, stream_index)``. ``substream`` selects a disjoint counter block of
    the same key, used to give every trader of a realization its own
    sequence. Streams are plain values; the generator is built on demand.
    """

    seed: int
    stream_index: int
    substream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_index", "substream"):
            value = getattr(self, name)
            if not 0 <= int(value) < 2**64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_index], dtype=np.uint64),
            counter=np.array([0, self.substream, 0, 0], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def child(self, substream: int) -> "RngStream":
        return RngStream(self.seed, self.stream_index, substream)

    def uniforms(self, n: int) -> np.ndarray:
        """First ``n`` raw variates of the stream, uniform on [0, 1)."""
        return self.generator().random(n)


def sample_duration(u, alpha):
    """Pareto duration with CCDF ``t**-alpha`` on ``t >= 1``, from ``u`` in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if np.any(u <= 0) or np.any(u > 1):
        raise ValueError("duration sampler needs u in (0, 1]; u = 0 gives an infinite duration")
    with np.errstate(over="ignore"):
        out = u ** (-1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def sample_rest(u, tau_r):
    """Exponential rest with mean ``tau_r``, from ``u`` in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if tau_r <= 0:
        raise ValueError("tau_r must be positive")
    if np.any(u <= 0) or np.any(u > 1):
        raise ValueError("rest sampler needs u in (0, 1]; u = 0 gives an infinite rest")
    # -0.0 -> 0.0 for u == 1
    out = -tau_r * np.log(u) + 0.0
    return float(out) if out.ndim == 0 else out


def sample_sign(u):
    """Order sign: -1 below one half, +1 otherwise."""
    u = np.asarray(u, dtype=float)
    out = np.where(u < 0.5, -1, 1)
    return int(out) if out.ndim == 0 else out
