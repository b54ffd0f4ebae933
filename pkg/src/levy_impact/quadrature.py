"""Quadrature for semi-infinite Fourier-type integrals.

``fourier_tail`` evaluates ``int_a^inf f(u) cos(k u) du`` for a smooth,
eventually monotone ``f``: the range is cut at the zeros of ``cos(k u)``,
each half-period panel is integrated by Gauss-Legendre, and the alternating
series of panel integrals is summed with Euler's transformation (repeated
averaging of partial sums). Non-oscillatory pieces go through QUADPACK in a
logarithmic variable, which turns power-law tails into exponential ones.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_BLOCK = 64
_MAX_PANELS = 1 << 16


class QuadratureError(RuntimeError):
    """Requested accuracy not reached; ``achieved`` holds the error bound."""

    def __init__(self, message, achieved=math.inf):
        super().__init__(f"{message} (achieved bound {achieved:.3g})")
        self.achieved = achieved


def _quad(func, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(func, a, b, epsabs=1e-15, epsrel=1e-13,
                                    limit=500, **kw)
    return value, err


def smooth_integral(f, a, b):
    """``int_a^b f(u) du`` for ``0 < a < b <= inf``, integrated in ``ln u``."""
    if b <= a:
        return 0.0, 0.0
    lo = math.log(a)
    hi = math.inf if math.isinf(b) else math.log(b)

    def integrand(v):
        if v > 700.0:
            return 0.0
        u = np.exp(v)
        return float(f(u) * u)

    with np.errstate(over="ignore", under="ignore"):
        return _quad(integrand, lo, hi)


def _panels(f, k, edges):
    """Gauss-Legendre integrals of ``f(u) cos(k u)`` over consecutive edges."""
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * np.sum(_GL_WEIGHTS * f(u) * np.cos(k * u), axis=1)


def euler_sum(terms):
    """Sum an alternating series from its leading terms.

    Returns ``(value, error_estimate)``. The partial sums are averaged
    pairwise until one value is left; the error estimate is the spread of
    the last averaging level.
    """
    partial = np.cumsum(terms)
    if partial.size < 2:
        return float(partial[-1]), math.inf
    level = partial
    while level.size > 2:
        level = 0.5 * (level[1:] + level[:-1])
    return float(0.5 * (level[0] + level[1])), float(0.5 * abs(level[1] - level[0]))


def fourier_tail(f, a, k, *, tol=1e-13):
    """``int_a^inf f(u) cos(k u) du`` and an absolute error estimate.

    ``f`` must accept numpy arrays, be smooth on ``[a, inf)`` and decay so
    that the integral converges conditionally.
    """
    k = abs(k)
    if a <= 0:
        raise ValueError("lower limit must be positive")
    if k == 0:
        return smooth_integral(f, a, math.inf)
    period = math.pi / k
    n0 = math.ceil(a / period - 0.5)
    first_zero = (n0 + 0.5) * period
    head, head_err = 0.0, 0.0
    if first_zero > a:
        if first_zero > 4.0 * a:
            head, head_err = smooth_integral(lambda u: f(u) * math.cos(k * u), a, first_zero)
        else:
            edges = np.linspace(a, first_zero, 5)
            head = float(np.sum(_panels(f, k, edges)))

    terms = np.empty(0)
    value, err = math.nan, math.inf
    start = n0
    while terms.size < _MAX_PANELS:
        edges = (np.arange(start, start + _BLOCK + 1) + 0.5) * period
        block = _panels(f, k, edges)
        terms = np.concatenate([terms, block])
        start += _BLOCK
        scale = max(abs(head), float(np.max(np.abs(terms))), 1e-300)
        if abs(terms[-1]) <= 1e-17 * scale:
            value, err = float(np.sum(terms)), 1e-16 * scale * math.sqrt(terms.size)
            break
        # direct sum of the leading terms, Euler on the remainder
        skip = max(terms.size - 48, 0)
        direct = float(np.sum(terms[:skip]))
        est_a, spread = euler_sum(terms[skip:])
        est_b, _ = euler_sum(terms[skip:-8])
        value = direct + est_a
        err = max(spread, abs(est_a - est_b))
        if err <= tol * scale:
            break
    return head + value, head_err + err


def fourier_deficit(f, a, k, *, tol=1e-13):
    """``int_a^inf f(u) (1 - cos(k u)) du`` without cancellation at small ``k``."""
    k = abs(k)
    if k == 0:
        return 0.0, 0.0
    period = math.pi / k
    cut = max((math.ceil(a / period - 0.5) + 0.5) * period, a)
    near, near_err = smooth_integral(
        lambda u: 2.0 * f(u) * math.sin(0.5 * k * u) ** 2, a, cut)
    whole, whole_err = smooth_integral(f, cut, math.inf)
    osc, osc_err = fourier_tail(f, cut, k, tol=tol)
    return near + whole - osc, near_err + whole_err + osc_err
