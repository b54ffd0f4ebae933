"""Acceptance criteria at desk scale; each check prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
from scipy import stats

from levy_impact.analytics import _cos_gamma, Psi_transform, psi_complement, psi_transform
from levy_impact.cli import EXPERIMENTS, parse_config, run_experiment
from levy_impact.engine import ensemble_values, simulate_market
from levy_impact.estimators import ccdf, hill_estimator
from levy_impact.params import ModelParams, RngStream, sample_duration, sample_rest

slow = pytest.mark.slow


def _run(tmp_path, name, experiment, **overrides):
    overrides["out"] = str(tmp_path / name)
    start = time.perf_counter()
    result = run_experiment(parse_config(overrides=overrides, experiment=experiment))
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def cubic_tail(tmp_path_factory):
    # shared by the inverse-cubic tail and the zero atom
    out = tmp_path_factory.mktemp("tail")
    return _run(out, "cubic", "tail", alpha=1.5, delta=0.5, tau_r=1e5, t=1e4, ensemble=10**5)


@slow
def test_criterion_1_normal_diffusion(tmp_path, report):
    res, wall = _run(tmp_path, "msd", "msd", alpha=1.5, delta=0.5, m=1, tau_r=1.0, t=1e3,
                     ensemble=10**4, threads=1, t_min=10.0, t_max=1e3)
    slope = res.summary[0].measured
    ok = abs(slope - 1.0) <= 0.10 and wall < 120.0
    report(1, ok, f"MSD slope {slope:.3f} (1.00 +- 0.10), {wall:.1f} s single-threaded")
    assert ok


@slow
@pytest.mark.parametrize("alpha, expected", [(1.25, 1.75), (1.5, 1.5)])
def test_criterion_2_superdiffusion(tmp_path, report, alpha, expected):
    path = tmp_path / "super.cfg"
    path.write_text(f"experiment = msd\ndelta = 1\nalpha = {alpha}\nt = 1000\n"
                    f"ensemble = 10000\n# intermediate window below the crossover\n"
                    f"fit_min = 30\nfit_max = 300\nout = {tmp_path / 'super'}\n")
    res = run_experiment(parse_config(path))
    slope = res.summary[0].measured
    ok = abs(slope - expected) <= 0.15
    report(2, ok, f"delta=1 alpha={alpha}: MSD slope {slope:.3f} ({expected} +- 0.15) "
                  f"on [30, 300]")
    assert ok


@slow
def test_criterion_3_m_scaling(report):
    t, n = 1e3, 10**4
    one = ensemble_values(ModelParams(1.5, 0.5, 1.0, 1, t), [t], 101, range(n))[:, 0]
    five = ensemble_values(ModelParams(1.5, 0.5, 1.0, 5, t), [t], 102, range(n))[:, 0]
    ratio = np.mean(five ** 2) / np.mean(one ** 2)
    ok = abs(ratio / 5.0 - 1.0) <= 0.10
    report(3, ok, f"MSD(M=5)/MSD(M=1) = {ratio:.3f} (5 within 10%)")
    assert ok


@slow
@pytest.mark.parametrize("delta, alpha, expected, tol", [
    (0.5, 1.5, 3.0, 0.3),
    (0.5, 1.25, 2.5, 0.3),
    (1.0, 1.75, 1.75, 0.2),
])
def test_criterion_4_tail_exponent(tmp_path, report, cubic_tail, delta, alpha, expected, tol):
    if (delta, alpha) == (0.5, 1.5):
        res, wall = cubic_tail
    else:
        res, wall = _run(tmp_path, "tail", "tail", alpha=alpha, delta=delta, tau_r=1e5, t=1e4,
                         ensemble=10**5)
    hill = res.summary[0]
    assert "Hill" in hill.quantity
    ok = abs(hill.measured - expected) <= tol and wall < 300.0
    report(4, ok, f"(delta, alpha) = ({delta}, {alpha}): Hill beta {hill.measured:.3f} "
                  f"({expected} +- {tol}), {wall:.1f} s")
    assert ok


@slow
def test_criterion_5_zero_atom(report, cubic_tail):
    res, _ = cubic_tail
    n = res.config.ensemble
    q = math.exp(-0.1)
    zero = res.extra["zero_fraction"]
    sigma = math.sqrt(q * (1.0 - q) / n)
    ok = res.config.params.m_traders == 1 and abs(zero - q) <= 3.0 * sigma
    report(5, ok, f"Prob[dm = 0] = {zero:.5f} vs exp(-0.1) = {q:.5f}, "
                  f"z = {(zero - q) / sigma:+.2f}")
    assert ok


@slow
def test_criterion_6_large_deviation(tmp_path, report):
    res, _ = _run(tmp_path, "ldp", "validate-ldp", alpha=1.5, delta=0.5, tau_r=1.0, t=1e3,
                  k_values=[0.05, 0.1], ensemble=10**6, threads=8)
    ok = True
    for row in res.summary:
        good = abs(row.measured - 1.0) <= 0.10
        ok &= good
        report(6, good, f"{row.quantity}: {row.measured:.4f} (1 within 10%)")
    assert ok


@pytest.mark.parametrize("alpha, delta", [(1.5, 0.5), (1.25, 0.5), (1.75, 1.0)])
def test_criterion_7_transform_oracles(report, alpha, delta):
    start = time.perf_counter()
    identity = max(abs(s * Psi_transform(0.0, s, alpha, delta).value
                       - (1.0 - psi_transform(0.0, s, alpha, delta).value))
                   for s in (1e-3, 1e-2, 0.1, 1.0, 10.0))
    psi00 = abs(psi_transform(0.0, 0.0, alpha, delta).value - 1.0)
    big00 = abs(Psi_transform(0.0, 0.0, alpha, delta).value - alpha / (alpha - 1.0))
    checks = [identity < 1e-6, psi00 < 1e-10, big00 < 1e-8]
    detail = (f"alpha={alpha} delta={delta}: identity {identity:.1e}, psi(0,0) {psi00:.1e}, "
              f"Psi(0,0) {big00:.1e}")
    if alpha > 2.0 * delta:
        k = 1e-3
        beta = alpha / delta
        nonanalytic = -beta * _cos_gamma(beta) * k ** beta
        coeff = (psi_complement(k, 0.0, alpha, delta).value - nonanalytic) / (k * k / 2.0)
        rel = abs(coeff / (alpha / (alpha - 2.0 * delta)) - 1.0)
        checks.append(rel < 1e-3)
        detail += f", quadratic coefficient rel {rel:.1e}"
    wall = time.perf_counter() - start
    ok = all(checks) and wall < 30.0
    report(7, ok, detail + f", {wall:.1f} s")
    assert ok


@slow
@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_criterion_8_volatility_clustering(tmp_path, report, alpha):
    res, _ = _run(tmp_path, "vol", "volacf", alpha=alpha, delta=0.5, m=1, tau_r=1.0,
                  ensemble=10**4, threads=8)
    row = res.summary[0]
    ok = abs(row.measured - (alpha - 1.0)) <= 0.2
    report(8, ok, f"alpha={alpha}: zeta {row.measured:.3f} +- {row.stderr:.3f} "
                  f"({alpha - 1.0:.2f} +- 0.2, conjecture)")
    assert ok


SMALL = {
    "msd": {"ensemble": 700, "t": 100.0, "points": 10},
    "tail": {"ensemble": 3000},
    "volacf": {"ensemble": 600},
    "validate-transforms": {"points": 3},
    "validate-ldp": {"ensemble": 3000, "t": 100.0},
}


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_criterion_9_determinism(tmp_path, report, experiment):
    blobs = []
    for name, threads in (("first", 1), ("again", 1), ("wide", 8)):
        _run(tmp_path, name, experiment, threads=threads, seed=77, **SMALL[experiment])
        blobs.append((tmp_path / name / "data.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    report(9, ok, f"{experiment}: rerun and 1 vs 8 workers byte-identical")
    assert ok


def _timed(fn):
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def _sampler_ks():
    u = RngStream(201, 0).uniforms(10**5)
    for alpha in (1.25, 1.5, 1.75):
        d = sample_duration(u, alpha)
        assert stats.kstest(d, lambda x: 1.0 - np.maximum(x, 1.0) ** -alpha).pvalue > 1e-3
    r = sample_rest(u, 7.0)
    assert stats.kstest(r, stats.expon(scale=7.0).cdf).pvalue > 1e-3


def _hill_pareto():
    for i, beta in enumerate((1.5, 2.5, 3.5)):
        x = sample_duration(1.0 - RngStream(202, i).uniforms(10**5), beta)
        fit = hill_estimator(x, 2000)
        assert abs(fit.beta_hat - beta) < 3.0 * fit.stderr


def _ccdf_monotone():
    x = np.abs(ensemble_values(ModelParams(1.5, 0.5, 10.0, 1, 100.0), [100.0], 203,
                               range(20000))[:, 0])
    values, p = ccdf(x)
    assert np.all(np.diff(values) > 0) and np.all(np.diff(p) <= 0)
    assert p[0] <= 1.0 and p[-1] >= 0.0


def _sign_flip():
    p = ModelParams(1.5, 0.5, 1.0, 3, 300.0)
    grid = np.geomspace(1.0, 300.0, 40)
    for r in range(200):
        up = simulate_market(p, grid, 204, r).values
        np.testing.assert_array_equal(simulate_market(p, grid, 204, r, sign_flip=True).values, -up)


def _factorization():
    t, k, m, n = 100.0, 0.15, 3, 20000
    single = ensemble_values(ModelParams(1.5, 0.5, 1.0, 1, t), [t], 205, range(n))[:, 0]
    market = ensemble_values(ModelParams(1.5, 0.5, 1.0, m, t), [t], 206, range(n))[:, 0]
    phi = np.mean(np.exp(1j * k * single))
    lhs = np.mean(np.cos(k * market))
    err = m * abs(phi) ** (m - 1) / math.sqrt(n) + np.std(np.cos(k * market)) / math.sqrt(n)
    assert abs(lhs - (phi ** m).real) < 3.0 * err


@pytest.mark.parametrize("name, check", [
    ("sampler KS", _sampler_ks),
    ("Hill on exact Pareto", _hill_pareto),
    ("CCDF monotone", _ccdf_monotone),
    ("sign-flip antisymmetry", _sign_flip),
    ("characteristic-function factorization", _factorization),
])
def test_criterion_10_property_suites(report, name, check):
    try:
        wall = _timed(check)
    except AssertionError:
        report(10, False, f"{name}: assertion failed")
        raise
    ok = wall < 60.0
    report(10, ok, f"{name}: {wall:.1f} s")
    assert ok
