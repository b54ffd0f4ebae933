import json

import pytest

from levy_impact.cli import (ConfigError, emit_summary, main, parse_config, run_experiment,
                             transform_grid)


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_msd_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, "experiment = msd\n"))
    p = cfg.params
    assert (p.alpha, p.delta, p.tau_r, p.m_traders, p.t_obs) == (1.5, 0.5, 1.0, 1, 1000.0)
    assert cfg.ensemble == 10000 and cfg.seed == 12345 and cfg.threads == 1
    assert (cfg.t_min, cfg.t_max, cfg.points) == (10.0, 1000.0, 31)
    assert (cfg.fit_min, cfg.fit_max, cfg.tolerance) == (10.0, 1000.0, 0.1)
    assert cfg.out == "out/msd"


def test_alpha_outside_range_rejected(tmp_path):
    path = _write(tmp_path, "experiment = msd\nalpha = 2.5\n")
    with pytest.raises(ConfigError, match=r"\(1, 2\)"):
        parse_config(path)
    cfg = parse_config(_write(tmp_path, "alpha = 2.5\nextended_range = true\n", "b.cfg"),
                       experiment="msd")
    assert cfg.params.alpha == 2.5


def test_unknown_key_reports_line(tmp_path):
    path = _write(tmp_path, "# comment\nexperiment = msd\n\nalhpa = 1.5\n")
    with pytest.raises(ConfigError, match=r"run.cfg:4: unknown key 'alhpa'"):
        parse_config(path)


@pytest.mark.parametrize("text, fragment", [
    ("ensemble = many\n", "ensemble"),
    ("m = 1.5\n", "m"),
    ("just words\n", "key = value"),
    ("seed = 1\nseed = 2\n", "duplicate"),
])
def test_bad_lines(tmp_path, text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(_write(tmp_path, text), experiment="msd")


def test_unknown_experiment_and_missing(tmp_path):
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config(_write(tmp_path, "experiment = walk\n"))
    with pytest.raises(ConfigError, match="no experiment"):
        parse_config(_write(tmp_path, "alpha = 1.5\n"))


def test_reference_tail_tuple(tmp_path):
    text = "experiment = tail\ndelta = 0.5\nalpha = 1.5\nt = 1e4\ntau_r = 1e5\n"
    cfg = parse_config(_write(tmp_path, text))
    p = cfg.params
    assert (p.delta, p.alpha, p.t_obs, p.tau_r) == (0.5, 1.5, 1e4, 1e5)
    assert cfg.experiment == "tail" and cfg.tolerance == 0.3


def test_flags_override_file(tmp_path):
    path = _write(tmp_path, "experiment = msd\nalpha = 1.25\nseed = 3\n")
    cfg = parse_config(path, {"alpha": 1.75, "seed": None, "fit_min": 20.0})
    assert cfg.params.alpha == 1.75 and cfg.seed == 3 and cfg.fit_min == 20.0


def test_presets():
    cfg = parse_config(experiment="volacf")
    assert (cfg.params.tau_r, cfg.params.t_obs) == (1.0, 10.0)
    assert (cfg.t_min, cfg.t_max, cfg.fit_min, cfg.fit_max) == (10.0, 1000.0, 10.0, 1000.0)
    cfg = parse_config(overrides={"preset": "si"}, experiment="volacf")
    assert (cfg.params.tau_r, cfg.params.t_obs) == (10.0, 1000.0)
    cfg = parse_config(overrides={"preset": "si", "tau_r": 2.0}, experiment="volacf")
    assert cfg.params.tau_r == 2.0
    with pytest.raises(ConfigError):
        parse_config(overrides={"preset": "other"}, experiment="volacf")


def test_transform_grid_documented():
    cfg = parse_config(experiment="validate-transforms")
    grid = transform_grid(cfg)
    assert len(grid) == 12
    assert (0.05 * 0.1 ** 0.5, 0.1) in grid
    assert [k for k, s in grid if s == 0.0] == [1e-3, 1e-2, 5e-2]


def _small_msd(tmp_path, name, threads):
    return parse_config(overrides={"ensemble": 600, "t": 100.0, "points": 12,
                                   "threads": threads, "out": str(tmp_path / name)},
                        experiment="msd")


def test_msd_outputs_and_determinism(tmp_path):
    a = run_experiment(_small_msd(tmp_path, "a", 1))
    run_experiment(_small_msd(tmp_path, "b", 8))
    run_experiment(_small_msd(tmp_path, "c", 1))
    data = (tmp_path / "a" / "data.csv").read_bytes()
    assert data == (tmp_path / "b" / "data.csv").read_bytes()
    assert data == (tmp_path / "c" / "data.csv").read_bytes()
    lines = data.decode().splitlines()
    assert lines[0] == "t [time],msd [price^2],stderr [price^2]"
    assert len(lines) - 1 == 12 == a.rows.shape[0]
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    for key in ("params", "seed", "version", "wall_time_s", "config"):
        assert key in meta
    plot = (tmp_path / "a" / "plot.py").read_text()
    assert "data.csv" in plot
    compile(plot, "plot.py", "exec")


def test_meta_closure(tmp_path):
    cfg = _small_msd(tmp_path, "first", 2)
    run_experiment(cfg)
    again = parse_config(tmp_path / "first" / "meta.json")
    assert again == cfg
    run_experiment(parse_config(tmp_path / "first" / "meta.json",
                                {"out": str(tmp_path / "second")}))
    assert (tmp_path / "first" / "data.csv").read_bytes() == \
        (tmp_path / "second" / "data.csv").read_bytes()


def test_tail_experiment_rows(tmp_path):
    cfg = parse_config(overrides={"ensemble": 20000, "out": str(tmp_path / "tail")},
                       experiment="tail")
    res = run_experiment(cfg)
    methods = [r.quantity for r in res.summary]
    assert any("Hill" in m for m in methods) and any("CCDF" in m for m in methods)
    assert all(r.theory == 3.0 for r in res.summary)
    header = (tmp_path / "tail" / "data.csv").read_text().splitlines()[0]
    assert "theory_line" in header
    assert res.rows.shape[0] == cfg.points


def test_validate_transforms_experiment(tmp_path):
    cfg = parse_config(overrides={"out": str(tmp_path / "vt")}, experiment="validate-transforms")
    res = run_experiment(cfg)
    assert res.rows.shape[0] == 12
    assert res.rows[:, -1].max() < 1e-3
    assert all(r.passed for r in res.summary)


def test_volacf_summary_flags_conjecture(tmp_path):
    cfg = parse_config(overrides={"alpha": 1.75, "ensemble": 300, "out": str(tmp_path / "v")},
                       experiment="volacf")
    res = run_experiment(cfg)
    text = emit_summary(res)
    assert "0.75 (conjecture)" in text
    assert res.rows.shape[0] == cfg.points


def test_summary_table_columns(tmp_path):
    res = run_experiment(_small_msd(tmp_path, "s", 1))
    header = emit_summary(res).splitlines()[0].split()
    assert header == ["quantity", "theory", "measured", "tolerance", "verdict"]


def test_main_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, "alpha = 2.5\n")
    assert main(["msd", "--config", str(bad)]) == 2
    assert "(1, 2)" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["msd", "--ensemble", "10", "--t", "100", "--out", str(blocker / "x")]) == 3
    assert main(["msd", "--ensemble", "1", "--t", "100", "--out", str(tmp_path / "one")]) == 3
    with pytest.raises(SystemExit) as info:
        main(["walk"])
    assert info.value.code == 2
    assert main(["msd", "--ensemble", "200", "--t", "100", "--threads", "2",
                 "--out", str(tmp_path / "ok")]) == 0
    out = capsys.readouterr().out
    assert "MSD exponent" in out and ("PASS" in out or "FAIL" in out)
