"""Command-line experiment runner.

Configuration is a flat text file of ``key = value`` lines (``#`` starts a
comment) with command-line flags taking precedence. A ``meta.json`` written
by a previous run is also accepted as a configuration file and reproduces
that run. Every experiment writes ``data.csv``, ``meta.json`` and
``plot.py`` into the output directory and prints a summary table.

Exit codes: 0 success, 2 configuration error, 3 runtime or quadrature
failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (Psi_expansion_s0, Psi_series, Psi_transform, cgf_lambda,
                        predict, psi_expansion_s0, psi_series, psi_transform)
from .engine import default_burn_in, ensemble_values, map_chunks, stationary_values
from .estimators import (EnsembleAccumulator, EstimationError, ccdf_regression,
                         fit_acf_exponent, fit_loglog_slope, hill_default_k,
                         hill_estimator, msd, volatility_acf)
from .params import ModelParams, ParameterError
from .quadrature import QuadratureError

EXPERIMENTS = ("msd", "tail", "volacf", "validate-transforms", "validate-ldp")
CHUNK_SIZE = 256

# volatility-study parameter sets: (tau_r, window)
PRESETS = {
    "methods": {"tau_r": 1.0, "t": 10.0},
    "si": {"tau_r": 10.0, "t": 1000.0},
}


# defaults that differ from the generic ones; precedence is
# generic < experiment < preset < file < flags
EXPERIMENT_DEFAULTS = {
    "tail": {"tau_r": 1e5, "t": 1e4, "ensemble": 100000},
    "volacf": PRESETS["methods"],
    "validate-transforms": {"k_values": [1e-3, 1e-2, 5e-2]},
    "validate-ldp": {"ensemble": 1000000},
}


class ConfigError(ValueError):
    pass


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    if isinstance(text, bool):
        raise ValueError("boolean given where an integer is expected")
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _str(text):
    return str(text)


def _opt_float(text):
    return None if text is None else float(text)


# key -> (parser, default); None defaults are filled per experiment
KEYS = {
    "experiment": (_str, None),
    "alpha": (float, 1.5),
    "delta": (float, 0.5),
    "tau_r": (float, 1.0),
    "m": (_int, 1),
    "t": (float, 1000.0),
    "extended_range": (_bool, False),
    "ensemble": (_int, 10000),
    "seed": (_int, 12345),
    "threads": (_int, 1),
    "out": (_str, None),
    "t_min": (_opt_float, None),
    "t_max": (_opt_float, None),
    "points": (_int, None),
    "fit_min": (_opt_float, None),
    "fit_max": (_opt_float, None),
    "burn_in": (_opt_float, None),
    "hill_fraction": (float, 0.01),
    "k_values": (_float_list, None),
    "tolerance": (_opt_float, None),
    "preset": (_str, None),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description; every field has a concrete value."""

    experiment: str
    params: ModelParams
    ensemble: int
    seed: int
    threads: int
    out: str
    t_min: float
    t_max: float
    points: int
    fit_min: float
    fit_max: float
    burn_in: float
    hill_fraction: float
    k_values: tuple
    tolerance: float
    preset: str | None = None

    def to_record(self) -> dict:
        """Flat key/value form; feeding it back to ``parse_config`` rebuilds ``self``."""
        p = self.params
        return {
            "experiment": self.experiment, "alpha": p.alpha, "delta": p.delta,
            "tau_r": p.tau_r, "m": p.m_traders, "t": p.t_obs,
            "extended_range": p.extended_range, "ensemble": self.ensemble,
            "seed": self.seed, "threads": self.threads, "out": self.out,
            "t_min": self.t_min, "t_max": self.t_max, "points": self.points,
            "fit_min": self.fit_min, "fit_max": self.fit_max, "burn_in": self.burn_in,
            "hill_fraction": self.hill_fraction, "k_values": list(self.k_values),
            "tolerance": self.tolerance, "preset": self.preset,
        }


def _read_file(path) -> dict:
    """Raw values from a ``key = value`` file or a previous run's ``meta.json``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        values = record.get("config", record)
        unknown = sorted(set(values) - set(KEYS))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        return {k: (v, path) for k, v in values.items() if v is not None}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = (value, f"{path}:{lineno}")
    return values


def _convert(key, value, where):
    parser = KEYS[key][0]
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from exc


def _log_grid(lo, hi, n):
    if not 0 < lo < hi:
        raise ConfigError(f"grid needs 0 < t_min < t_max, got [{lo}, {hi}]")
    if n < 3:
        raise ConfigError(f"grid needs at least 3 points, got {n}")
    return np.geomspace(lo, hi, n)


def parse_config(path=None, overrides=None, experiment=None) -> ExperimentConfig:
    """Merge defaults, an optional preset, a config file and flag overrides."""
    raw = {}
    if path is not None:
        for key, (value, where) in _read_file(path).items():
            raw[key] = _convert(key, value, where)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown option {key!r}")
        raw[key] = _convert(key, value, "command line")
    if experiment is not None:
        raw["experiment"] = experiment
    name = raw.get("experiment")
    if name is None:
        raise ConfigError("no experiment given")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")

    values = {k: default for k, (_, default) in KEYS.items()}
    preset = raw.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    values.update(EXPERIMENT_DEFAULTS.get(name, {}))
    if preset is not None:
        values.update(PRESETS[preset])
    values.update(raw)

    try:
        params = ModelParams(values["alpha"], values["delta"], values["tau_r"],
                             values["m"], values["t"], values["extended_range"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if values["ensemble"] < 1:
        raise ConfigError("ensemble must be at least 1")
    if values["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if not 0 < values["hill_fraction"] < 1:
        raise ConfigError("hill_fraction must lie in (0, 1)")
    _fill_defaults(name, params, values)
    _log_grid(values["t_min"], values["t_max"], values["points"])
    if values["fit_min"] >= values["fit_max"]:
        raise ConfigError("fit_min must be below fit_max")
    if values["burn_in"] < 0:
        raise ConfigError("burn_in must be non-negative")
    return ExperimentConfig(
        experiment=name, params=params, ensemble=values["ensemble"], seed=values["seed"],
        threads=values["threads"], out=values["out"], t_min=values["t_min"],
        t_max=values["t_max"], points=values["points"], fit_min=values["fit_min"],
        fit_max=values["fit_max"], burn_in=values["burn_in"],
        hill_fraction=values["hill_fraction"], k_values=tuple(values["k_values"]),
        tolerance=values["tolerance"], preset=preset,
    )


def _fill_defaults(name, params, v):
    """Experiment-specific defaults for keys left unset."""
    t = params.t_obs

    def setdefault(key, value):
        if v[key] is None:
            v[key] = value

    setdefault("out", f"out/{name}")
    setdefault("burn_in", default_burn_in(params))
    setdefault("k_values", [0.05, 0.1])
    if name == "msd":
        setdefault("t_min", min(10.0, t / 100.0))
        setdefault("t_max", t)
        setdefault("points", 31)
        setdefault("tolerance", 0.15 if 2 * params.delta > params.alpha else 0.1)
        if v["t_max"] > t:
            raise ConfigError(f"t_max={v['t_max']} exceeds the horizon t={t}")
    elif name == "tail":
        # CCDF output and regression window inside 1 << |x| << t**delta
        top = t ** params.delta
        setdefault("t_min", 1.0)
        setdefault("t_max", top)
        setdefault("points", 41)
        setdefault("fit_min", top ** 0.25)
        setdefault("fit_max", top ** 0.75)
        setdefault("tolerance", 0.3)
    elif name == "volacf":
        # here t is the increment window and the grid holds the lags
        setdefault("t_min", t)
        setdefault("t_max", 100.0 * t)
        setdefault("points", 25)
        setdefault("tolerance", 0.2)
    elif name == "validate-transforms":
        setdefault("t_min", 0.01)
        setdefault("t_max", 1.0)
        setdefault("points", 3)
        setdefault("tolerance", 1e-3)
    elif name == "validate-ldp":
        setdefault("t_min", t / 100.0)
        setdefault("t_max", t)
        setdefault("points", 3)
        setdefault("tolerance", 0.1)
    setdefault("fit_min", v["t_min"])
    setdefault("fit_max", v["t_max"])


# -- experiments -------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    quantity: str
    theory: float
    measured: float
    stderr: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(abs(self.measured - self.theory) <= self.tolerance)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list
    rows: np.ndarray
    summary: list
    extra: dict = field(default_factory=dict)


def _chunks(cfg, fn):
    return map_chunks(fn, cfg.ensemble, CHUNK_SIZE, cfg.threads)


def _run_msd(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    grid = _log_grid(cfg.t_min, cfg.t_max, cfg.points)
    parts = _chunks(cfg, lambda idx: (idx.start, ensemble_values(p, grid, cfg.seed, idx)))
    acc = EnsembleAccumulator(grid)
    for start, values in parts:
        acc.add(start, values)
    curve = msd(acc)
    fit = fit_loglog_slope(curve.t, curve.msd, cfg.fit_min, cfg.fit_max)
    theory = predict(p)
    note = theory.msd_regime.value + (" (marginal)" if theory.marginal else "")
    rows = np.column_stack([curve.t, curve.msd, curve.stderr])
    summary = [SummaryRow("MSD exponent", theory.msd_exponent, fit.slope, fit.stderr,
                          cfg.tolerance, note)]
    return ExperimentResult(cfg, ["t [time]", "msd [price^2]", "stderr [price^2]"],
                            rows, summary, {"fit_intercept": fit.intercept})


def _run_tail(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    grid = np.array([p.t_obs])
    parts = _chunks(cfg, lambda idx: np.abs(ensemble_values(p, grid, cfg.seed, idx)[:, 0]))
    samples = np.concatenate(parts)
    k = hill_default_k(samples.size, cfg.hill_fraction)
    hill = hill_estimator(samples, k)
    reg = ccdf_regression(samples, cfg.fit_min, cfg.fit_max)
    beta = predict(p).beta
    x = _log_grid(cfg.t_min, cfg.t_max, cfg.points)
    ordered = np.sort(samples)
    p_gt = 1.0 - np.searchsorted(ordered, x, side="right") / ordered.size
    # two-sided integral of alpha t/(2 tau_r delta) |x|**(-1-beta)
    line = p.alpha * p.t_obs / (p.tau_r * p.delta * beta) * x ** (-beta)
    rows = np.column_stack([x, p_gt, line])
    zero = float(np.mean(samples == 0.0))
    summary = [
        SummaryRow("tail exponent (Hill)", beta, hill.beta_hat, hill.stderr, cfg.tolerance,
                   f"top {k} of {samples.size}"),
        SummaryRow("tail exponent (CCDF fit)", beta, reg.beta_hat, reg.stderr, cfg.tolerance,
                   f"|x| in [{cfg.fit_min:.4g}, {cfg.fit_max:.4g}]"),
    ]
    extra = {"hill_k": k, "hill_threshold": hill.fit_range[0], "zero_fraction": zero,
             "ccdf_points_used": reg.n_used}
    return ExperimentResult(cfg, ["x [price]", "ccdf [1]", "theory_line [1]"],
                            rows, summary, extra)


def _run_volacf(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    window = p.t_obs
    lags = _log_grid(cfg.t_min, cfg.t_max, cfg.points)
    grid = np.unique(np.concatenate([[0.0, window], lags, lags + window]))
    parts = _chunks(cfg, lambda idx: stationary_values(p, grid, cfg.burn_in, cfg.seed, idx))
    acf = volatility_acf(np.vstack(parts), grid, window, lags)
    fit = fit_acf_exponent(acf, cfg.fit_min, cfg.fit_max)
    theory = predict(p)
    rows = np.column_stack([acf.lags, acf.c_v, acf.stderr])
    summary = [SummaryRow("volatility ACF exponent zeta", theory.zeta, -fit.slope, fit.stderr,
                          cfg.tolerance, theory.zeta_status)]
    return ExperimentResult(cfg, ["lag [time]", "c_v [1]", "stderr [1]"], rows, summary,
                            {"window": window, "fit_points": fit.n_points})


def transform_grid(cfg: ExperimentConfig):
    """``(k, s)`` pairs checked by ``validate-transforms``.

    For each ``s`` of the log grid, ``k = c * s**delta`` with ``c`` in
    ``{0, 0.01, 0.05}`` keeps ``k**2 Ei`` terms comparable across ``s``;
    at ``s = 0`` the ``k`` values come from ``k_values`` and the comparison
    is against the non-analytic small-``k`` expansion.
    """
    s_values = _log_grid(cfg.t_min, cfg.t_max, cfg.points)
    pairs = [(c * s ** cfg.params.delta, s) for s in s_values for c in (0.0, 0.01, 0.05)]
    pairs += [(k, 0.0) for k in cfg.k_values]
    return pairs


def _run_transforms(cfg: ExperimentConfig) -> ExperimentResult:
    a, d = cfg.params.alpha, cfg.params.delta
    rows = []
    for k, s in transform_grid(cfg):
        psi = psi_transform(k, s, a, d).value
        big = Psi_transform(k, s, a, d).value
        if s > 0:
            psi_ref, big_ref = psi_series(k, s, a, d), Psi_series(k, s, a, d)
        else:
            psi_ref, big_ref = psi_expansion_s0(k, a, d), Psi_expansion_s0(k, a, d)
        dev = max(abs(psi - psi_ref), abs(big - big_ref))
        rows.append([k, s, psi, psi_ref, big, big_ref, dev])
    rows = np.array(rows)
    s = cfg.t_min
    identity = abs(s * Psi_transform(0.0, s, a, d).value - (1.0 - psi_transform(0.0, s, a, d).value))
    summary = [
        SummaryRow("max |quadrature - series|", 0.0, float(rows[:, -1].max()), 0.0,
                   cfg.tolerance),
        SummaryRow("psi(0, 0)", 1.0, psi_transform(0.0, 0.0, a, d).value, 0.0, 1e-10),
        SummaryRow("Psi(0, 0)", a / (a - 1.0), Psi_transform(0.0, 0.0, a, d).value, 0.0, 1e-8),
        SummaryRow(f"s Psi(0,s) - 1 + psi(0,s) at s={s:g}", 0.0, identity, 0.0, 1e-6),
    ]
    columns = ["k [1/price]", "s [1/time]", "psi_quad [1]", "psi_series [1]",
               "Psi_quad [time]", "Psi_series [time]", "abs_dev [1]"]
    return ExperimentResult(cfg, columns, rows, summary)


def _run_ldp(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    t = p.t_obs
    k = np.asarray(cfg.k_values, dtype=float)
    grid = np.array([t])

    def partial(idx):
        x = ensemble_values(p, grid, cfg.seed, idx)[:, 0]
        c = np.cos(np.outer(x, k))
        return c.sum(axis=0), (c * c).sum(axis=0)

    parts = _chunks(cfg, partial)
    n = cfg.ensemble
    s1 = np.zeros(k.size)
    s2 = np.zeros(k.size)
    for a, b in parts:
        s1 = s1 + a
        s2 = s2 + b
    mean = s1 / n
    sd = np.sqrt(np.maximum(s2 / n - mean * mean, 0.0) / max(n - 1, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = -np.log(mean) / t
    rate_err = sd / (np.abs(mean) * t)
    lam = np.array([cgf_lambda(kk, p).value for kk in k])
    rows = np.column_stack([k, rate, rate_err, lam])
    summary = []
    for kk, r, e, l in zip(k, rate, rate_err, lam):
        # relative comparison: theory 1, measured rate / Lambda
        summary.append(SummaryRow(f"rate / Lambda at k={kk:g}", 1.0, r / l, e / l,
                                  cfg.tolerance))
    columns = ["k [1/price]", "mc_rate [1/time]", "mc_rate_stderr [1/time]",
               "lambda [1/time]"]
    return ExperimentResult(cfg, columns, rows, summary)


RUNNERS = {
    "msd": _run_msd,
    "tail": _run_tail,
    "volacf": _run_volacf,
    "validate-transforms": _run_transforms,
    "validate-ldp": _run_ldp,
}


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


PLOT_TEMPLATE = '''"""Plot {experiment} results from data.csv (needs matplotlib)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "data.csv", newline="", encoding="utf-8") as fh:
    reader = csv.reader(fh)
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader]
cols = list(zip(*rows))

fig, ax = plt.subplots()
x = cols[{x}]
for j in {ys}:
    pts = [(a, b) for a, b in zip(x, cols[j]) if a > 0 and b > 0]
    if pts:
        ax.plot(*zip(*pts), "o-", ms=3, label=header[j])
ax.set_xscale("{xscale}")
ax.set_yscale("{yscale}")
ax.set_xlabel(header[{x}])
ax.legend()
fig.savefig(here / "plot.png", dpi=150)
'''

PLOT_LAYOUT = {
    "msd": (0, [1], "log", "log"),
    "tail": (0, [1, 2], "log", "log"),
    "volacf": (0, [1], "log", "log"),
    "validate-transforms": (1, [6], "log", "log"),
    "validate-ldp": (0, [1, 3], "linear", "linear"),
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run ``cfg`` and write ``data.csv``, ``meta.json`` and ``plot.py`` to ``cfg.out``."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out}: {exc}") from exc
    start = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - start
    x, ys, xscale, yscale = PLOT_LAYOUT[cfg.experiment]
    meta = {
        "experiment": cfg.experiment,
        "version": __version__,
        "seed": cfg.seed,
        "params": asdict(cfg.params),
        "wall_time_s": wall,
        "rows": int(result.rows.shape[0]),
        "columns": result.columns,
        "summary": [dict(asdict(r), verdict=r.verdict) for r in result.summary],
        "extra": result.extra,
        "config": cfg.to_record(),
    }
    try:
        (out / "data.csv").write_text(_csv_text(result.columns, result.rows), encoding="utf-8")
        (out / "meta.json").write_text(json.dumps(meta, indent=2, default=float) + "\n",
                                       encoding="utf-8")
        (out / "plot.py").write_text(
            PLOT_TEMPLATE.format(experiment=cfg.experiment, x=x, ys=ys,
                                 xscale=xscale, yscale=yscale), encoding="utf-8")
    except OSError as exc:
        raise RuntimeError(f"cannot write results to {out}: {exc}") from exc
    return result


def emit_summary(result: ExperimentResult) -> str:
    """Table of quantity, theory, measured +- stderr, tolerance and verdict."""
    header = ("quantity", "theory", "measured", "tolerance", "verdict")
    lines = []
    for r in result.summary:
        theory = f"{r.theory:.6g}"
        if r.note:
            theory += f" ({r.note})"
        lines.append((r.quantity, theory, f"{r.measured:.6g} +- {r.stderr:.2g}",
                      f"{r.tolerance:.3g}", r.verdict))
    widths = [max(len(h), *(len(l[i]) for l in lines)) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join([fmt.format(*header), fmt.format(*("-" * w for w in widths))]
                     + [fmt.format(*l) for l in lines])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levy-impact", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="key = value file, or meta.json of an earlier run")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--tau-r", dest="tau_r", type=float)
    ap.add_argument("--m", type=int)
    ap.add_argument("--t", type=float)
    ap.add_argument("--ensemble", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out")
    ap.add_argument("--fit-min", dest="fit_min", type=float)
    ap.add_argument("--fit-max", dest="fit_max", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("experiment", "config")}
    try:
        cfg = parse_config(args.config, overrides, args.experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg)
    except (QuadratureError, EstimationError, ZeroDivisionError, RuntimeError,
            ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(emit_summary(result))
    print(f"wrote {cfg.out}/data.csv ({result.rows.shape[0]} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
