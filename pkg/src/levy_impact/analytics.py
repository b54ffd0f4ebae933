"""Closed forms and transform-domain quantities for a single order splitter.

Metaorder durations have density ``alpha * t**(-alpha-1)`` on ``t >= 1``
and survival ``Psi_m(t) = t**-alpha`` (``1`` below ``t = 1``); rests are
exponential with mean ``tau_r``. A flight of duration ``t`` displaces the
price by ``+-t**delta``. All transforms are taken for real ``k`` and real
``s >= 0``: ``psi(k, s)`` and ``Psi(k, s)`` are the Fourier-Laplace
transforms of the flight density and of the flight survival with the
space-time coupling ``|x| = t**delta``, and ``P(k, s)`` is the exact
transform of the displacement density of a trader started at rest.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from .params import ModelParams
from .quadrature import QuadratureError, _quad, fourier_deficit, fourier_tail, smooth_integral

DEFAULT_ABS_TOL = 1e-8
EULER_GAMMA = 0.5772156649015329


class Regime(enum.Enum):
    NORMAL = "normal"
    SUPERDIFFUSIVE = "superdiffusive"


@dataclass(frozen=True)
class MsdExponent:
    exponent: float
    regime: Regime
    marginal: bool = False


@dataclass(frozen=True)
class TheoryPrediction:
    msd_exponent: float
    msd_regime: Regime
    beta: float
    zeta: float
    tau_m: float
    marginal: bool = False
    zeta_status: str = "conjecture"


@dataclass(frozen=True)
class TransformValue:
    k: float
    s: float
    value: float
    abs_error_bound: float

    def __float__(self):
        return self.value


# -- exponents ---------------------------------------------------------------

def mean_duration(alpha: float) -> float:
    if alpha <= 1:
        raise ValueError(f"mean duration is infinite for alpha={alpha} <= 1")
    return alpha / (alpha - 1.0)


def msd_exponent(alpha: float, delta: float) -> MsdExponent:
    """Growth exponent of the mean-squared displacement.

    Superdiffusive ``1 + 2 delta - alpha`` when ``2 delta > alpha``, otherwise
    normal diffusion. The boundary ``2 delta == alpha`` is reported as normal
    with ``marginal=True``; logarithmic corrections are not modelled.
    """
    if math.isclose(2.0 * delta, alpha, rel_tol=0.0, abs_tol=1e-12):
        return MsdExponent(1.0, Regime.NORMAL, marginal=True)
    if 2.0 * delta > alpha:
        return MsdExponent(1.0 + 2.0 * delta - alpha, Regime.SUPERDIFFUSIVE)
    return MsdExponent(1.0, Regime.NORMAL)


def tail_exponent(alpha: float, delta: float) -> float:
    return alpha / delta


def jacobian_tail(alpha: float, delta: float) -> float:
    """Density exponent of a single flight's displacement, ``|x|**-(beta+1)``.

    Changing variables ``x = t**delta`` in ``alpha t**(-alpha-1) dt`` gives
    ``(alpha/delta) x**(-alpha/delta - 1) dx``.
    """
    return alpha / delta + 1.0


def vol_acf_exponent(alpha: float) -> float:
    """Volatility ACF decay exponent ``alpha - 1``; an empirical conjecture."""
    if not 1.0 < alpha < 2.0:
        raise ValueError("the conjectured exponent is stated for 1 < alpha < 2")
    return alpha - 1.0


def predict(params: ModelParams) -> TheoryPrediction:
    msd = msd_exponent(params.alpha, params.delta)
    zeta = params.alpha - 1.0
    return TheoryPrediction(
        msd_exponent=msd.exponent,
        msd_regime=msd.regime,
        beta=tail_exponent(params.alpha, params.delta),
        zeta=zeta,
        tau_m=mean_duration(params.alpha),
        marginal=msd.marginal,
    )


# -- generalized exponential integral -----------------------------------------

def _expint_cf(n, z):
    # modified Lentz on the continued fraction of z**(n-1) Gamma(1-n, z)
    tiny = 1e-300
    b = z + n
    c = 1.0 / tiny
    d = 1.0 / (b if b != 0 else tiny)
    h = d
    for i in range(1, 10000):
        an = -i * (n - 1.0 + i)
        b += 2.0
        d = an * d + b
        d = tiny if d == 0 else d
        c = b + an / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        step = c * d
        h *= step
        if abs(step - 1.0) < 1e-16:
            return h * math.exp(-z)
    raise ArithmeticError(f"continued fraction for Ei({n}, {z}) did not converge")


def _expint_series(n, z):
    if n > 0 and float(n).is_integer():
        m = int(n) - 1
        total = 1.0 / m if m else -math.log(z) - EULER_GAMMA
        fact = 1.0
        for i in range(1, 10000):
            fact *= -z / i
            if i != m:
                step = -fact / (i - m)
            else:
                digamma = -EULER_GAMMA + sum(1.0 / j for j in range(1, m + 1))
                step = fact * (-math.log(z) + digamma)
            total += step
            if abs(step) < abs(total) * 1e-17:
                return total
        raise ArithmeticError(f"series for Ei({n}, {z}) did not converge")
    total = z ** (n - 1.0) * math.gamma(1.0 - n)
    term = 1.0
    for i in range(0, 10000):
        if i:
            term *= -z / i
        step = term / (i + 1.0 - n)
        total -= step
        if abs(step) < 1e-17 * max(abs(total), 1e-300):
            return total
    raise ArithmeticError(f"series for Ei({n}, {z}) did not converge")


def expint(n: float, z: float) -> float:
    """``Ei(n, z) = int_1^inf t**-n exp(-z t) dt`` for real ``n`` and ``z >= 0``.

    Continued fraction for ``z >= 1``, power series below.
    """
    if z < 0:
        raise ValueError("z must be non-negative")
    if z == 0:
        return 1.0 / (n - 1.0) if n > 1 else math.inf
    if z >= 1.0:
        return _expint_cf(float(n), float(z))
    return _expint_series(float(n), float(z))


# -- rest-time transforms -------------------------------------------------------

def psi_r_laplace(s, tau_r):
    """Laplace transform of the exponential rest density, ``1 / (1 + tau_r s)``."""
    return 1.0 / (1.0 + tau_r * s)


def Psi_r_laplace(s, tau_r):
    """Laplace transform of the rest survival ``exp(-t/tau_r)``."""
    return tau_r / (1.0 + tau_r * s)


# -- flight transforms ----------------------------------------------------------

def _power_amplitude(power, s, delta):
    """``u -> exp(-s u**(1/delta)) * u**(-power-1)`` on array input."""
    if s == 0:
        return lambda u: u ** (-power - 1.0)
    inv = 1.0 / delta

    def f(u):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-s * u ** inv) * u ** (-power - 1.0)
    return f


def _checked(k, s, value, err, tol):
    if not math.isfinite(value) or err > tol:
        raise QuadratureError(f"transform at k={k}, s={s} missed tolerance {tol:g}", err)
    return TransformValue(float(k), float(s), float(value), float(err))


def _check_s(s):
    if s < 0:
        raise ValueError("Laplace variable s must be non-negative")


def psi_transform(k, s, alpha, delta, *, tol=DEFAULT_ABS_TOL) -> TransformValue:
    """``psi(k, s) = int_1^inf exp(-s t) cos(k t**delta) alpha t**(-alpha-1) dt``."""
    _check_s(s)
    beta = alpha / delta
    tail, err = fourier_tail(_power_amplitude(beta, s, delta), 1.0, k)
    return _checked(k, s, alpha / delta * tail, alpha / delta * err, tol)


def psi_complement(k, s, alpha, delta, *, tol=DEFAULT_ABS_TOL) -> TransformValue:
    """``1 - psi(k, s)`` evaluated without cancellation near ``k = s = 0``."""
    _check_s(s)
    beta = alpha / delta
    laplace, err_l = 0.0, 0.0
    if s > 0:
        laplace, err_l = smooth_integral(
            lambda t: -np.expm1(-s * t) * t ** (-alpha - 1.0), 1.0, math.inf)
        laplace *= alpha
        err_l *= alpha
    deficit, err_d = fourier_deficit(_power_amplitude(beta, s, delta), 1.0, k)
    value = laplace + alpha / delta * deficit
    return _checked(k, s, value, err_l + alpha / delta * err_d, tol)


def Psi_transform(k, s, alpha, delta, *, tol=DEFAULT_ABS_TOL) -> TransformValue:
    """``Psi(k, s) = int_0^inf Psi_m(t) exp(-s t) cos(k t**delta) dt``."""
    _check_s(s)
    if s == 0 and k == 0 and alpha <= 1:
        return TransformValue(0.0, 0.0, math.inf, 0.0)
    head, err_h = _quad(lambda t: math.exp(-s * t) * math.cos(k * t ** delta), 0.0, 1.0)
    gamma = (alpha - 1.0) / delta
    tail, err_t = fourier_tail(_power_amplitude(gamma, s, delta), 1.0, k)
    return _checked(k, s, head + tail / delta, err_h + err_t / delta, tol)


def exact_pks(k, s, params: ModelParams, *, tol=DEFAULT_ABS_TOL) -> TransformValue:
    """Exact Fourier-Laplace transform ``P(k, s)`` of a single trader's displacement.

    ``P = (Psi_r + Psi psi_r) / (1 - psi_r psi)``; the denominator is
    assembled as ``tau_r s psi_r + psi_r (1 - psi)`` so that it keeps full
    relative precision near the origin.
    """
    _single_trader(params)
    if s <= 0:
        raise ValueError("exact_pks needs s > 0")
    tau_r = params.tau_r
    pr = psi_r_laplace(s, tau_r)
    big = Psi_transform(k, s, params.alpha, params.delta, tol=tol)
    comp = psi_complement(k, s, params.alpha, params.delta, tol=tol)
    num = Psi_r_laplace(s, tau_r) + big.value * pr
    den = tau_r * s * pr + pr * comp.value
    den_err = pr * comp.abs_error_bound
    if den <= den_err:
        raise ZeroDivisionError(f"denominator of P(k, s) vanishes at k={k}, s={s}")
    value = num / den
    err = pr * big.abs_error_bound / den + abs(value) * den_err / den
    return TransformValue(float(k), float(s), value, err)


def cgf_lambda(k, params: ModelParams, *, tol=DEFAULT_ABS_TOL) -> TransformValue:
    """Large-deviation rate ``Lambda(k) = (1 - psi(k,0)) / (tau_r + Psi(k,0))``."""
    _single_trader(params)
    if k == 0:
        return TransformValue(0.0, 0.0, 0.0, 0.0)
    comp = psi_complement(k, 0.0, params.alpha, params.delta, tol=tol)
    big = Psi_transform(k, 0.0, params.alpha, params.delta, tol=tol)
    den = params.tau_r + big.value
    value = comp.value / den
    err = comp.abs_error_bound / den + abs(value) * big.abs_error_bound / den
    return TransformValue(float(k), 0.0, value, err)


def msd_laplace(s, params: ModelParams) -> float:
    """Laplace transform of the single-trader MSD, ``-d^2 P(k, s)/dk^2`` at ``k = 0``.

    Uses the second moments ``int t**(2 delta) exp(-s t) psi_m`` and
    ``int t**(2 delta) exp(-s t) Psi_m`` of the flight transforms.
    """
    _single_trader(params)
    if s <= 0:
        raise ValueError("msd_laplace needs s > 0")
    alpha, delta, tau_r = params.alpha, params.delta, params.tau_r
    pr = psi_r_laplace(s, tau_r)
    two_d = 2.0 * delta
    m_psi, _ = smooth_integral(lambda t: np.exp(-s * t) * t ** (two_d - alpha - 1.0),
                               1.0, math.inf)
    m_psi *= alpha
    near, _ = _quad(lambda t: math.exp(-s * t) * t ** two_d, 0.0, 1.0)
    far, _ = smooth_integral(lambda t: np.exp(-s * t) * t ** (two_d - alpha), 1.0, math.inf)
    m_big = near + far
    comp = psi_complement(0.0, s, alpha, delta).value
    big = Psi_transform(0.0, s, alpha, delta).value
    num = Psi_r_laplace(s, tau_r) + big * pr
    den = tau_r * s * pr + pr * comp
    return (pr * m_big * den + num * pr * m_psi) / den ** 2


def _single_trader(params: ModelParams):
    if params.m_traders != 1:
        raise ValueError("single-trader transform; use m_traders=1 and raise to the M-th power")


# -- expansions used as oracles -------------------------------------------------

def _cos_gamma(b):
    """``cos(pi b/2) Gamma(-b)``, continued to its finite limit at odd integers."""
    if float(b).is_integer():
        n = int(b)
        if n % 2 == 0:
            raise ValueError(f"expansion has logarithmic terms at even exponent {b}")
        return 0.5 * math.pi * math.sin(0.5 * math.pi * n) * (-1) ** n / math.factorial(n)
    return math.cos(0.5 * math.pi * b) * math.gamma(-b)


def psi_expansion_s0(k, alpha, delta):
    """Small-``k`` form ``1 - D k^2/2 + (alpha/delta) cos(pi beta/2) Gamma(-beta) |k|**beta``."""
    beta = alpha / delta
    k = abs(k)
    return (1.0 - alpha / (alpha - 2.0 * delta) * k * k / 2.0
            + beta * _cos_gamma(beta) * k ** beta)


def Psi_expansion_s0(k, alpha, delta):
    """Small-``k`` form of ``Psi(k, 0)`` with the ``|k|**((alpha-1)/delta)`` term.

    The quadratic coefficient collects the flight tail beyond ``t = 1`` and
    the unit segment ``int_0^1 cos(k t**delta) dt``.
    """
    gamma = (alpha - 1.0) / delta
    k = abs(k)
    quadratic = 1.0 / (alpha - 2.0 * delta - 1.0) + 1.0 / (1.0 + 2.0 * delta)
    return (mean_duration(alpha) - k * k / 2.0 * quadratic
            + _cos_gamma(gamma) * k ** gamma / delta)


def psi_series(k, s, alpha, delta):
    """Second-order series ``alpha Ei(1+alpha, s) - alpha k^2/2 Ei(1+alpha-2delta, s)``."""
    return alpha * expint(1.0 + alpha, s) - alpha * k * k / 2.0 * expint(1.0 + alpha - 2.0 * delta, s)


def Psi_series(k, s, alpha, delta):
    """Second-order series of ``Psi(k, s)`` for ``s > 0`` built from ``Ei``."""
    unit = (1.0 - math.exp(-s)) / s
    near_moment = s ** (-1.0 - 2.0 * delta) * math.gamma(1.0 + 2.0 * delta) - expint(-2.0 * delta, s)
    return (expint(alpha, s) + unit
            - k * k / 2.0 * (expint(alpha - 2.0 * delta, s) + near_moment))


# -- long resting-time approximation ---------------------------------------------

@dataclass(frozen=True)
class LongRestPdf:
    atom_at_zero: float
    density: np.ndarray


def long_rest_pdf(x, t, params: ModelParams) -> LongRestPdf:
    """First-order expansion of ``P(x, t)`` in ``1/tau_r``.

    Three contributions: the atom ``exp(-t/tau_r)`` at zero (no execution
    yet), one execution still running at ``t``, and one completed execution.
    The density part is returned for ``x != 0``; it vanishes beyond
    ``|x| = t**delta``. The completed-flight term carries the prefactor
    ``alpha`` of the duration density ``alpha t**(-alpha-1)``.
    """
    _single_trader(params)
    alpha, delta, tau_r = params.alpha, params.delta, params.tau_r
    if t > tau_r:
        warnings.warn(f"long-rest approximation used with t={t} > tau_r={tau_r}",
                      RuntimeWarning, stacklevel=2)
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        decay = np.exp(-(t - ax ** (1.0 / delta)) / tau_r)
        above = ax >= 1.0
        ongoing = np.where(above, ax ** (-1.0 - (alpha - 1.0) / delta), ax ** (-1.0 + 1.0 / delta))
        completed = np.where(above, alpha * t * ax ** (-1.0 - alpha / delta), 0.0)
        density = decay / (2.0 * tau_r * delta) * (ongoing + completed)
    density = np.where((ax > 0) & (ax <= t ** delta), density, 0.0)
    if density.ndim == 0:
        density = float(density)
    return LongRestPdf(math.exp(-t / tau_r), density)


def long_rest_power_law(x, t, params: ModelParams):
    """Power-law window ``alpha t/(2 tau_r delta) |x|**(-1-beta)`` for ``1 << |x| << t**delta``."""
    beta = tail_exponent(params.alpha, params.delta)
    return params.alpha * t / (2.0 * params.tau_r * params.delta) * np.abs(x) ** (-1.0 - beta)
