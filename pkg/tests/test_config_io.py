import json
from pathlib import Path

import numpy as np
import pytest

from scghg import io
from scghg.config import RunConfig, parse_config, parse_mapping, to_mapping
from scghg.damages import macro as M
from scghg.errors import ConfigError
from scghg.scenario import synth_ensemble, write_ensemble

ROOT = Path(__file__).resolve().parents[1]
RUN_OUTPUTS = ("scghg_table.csv", "components.csv", "trials.csv", "temp_paths.csv", "pairing.csv")


def _toml(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError, match="pluse_year"):
        parse_config(_toml(tmp_path, '[run]\npluse_year = 2030\nsources = ["mortality"]\n'))


def test_b12_at_unit_eta_rejected_in_integrated_mode():
    doc = {"run": {"mode": "integrated", "sources": ["macro:Harding2023", "mortality"]},
           "discounting": {"eta": 1.0, "two_good": "B12"}}
    with pytest.raises(ConfigError, match="B13"):
        parse_mapping(doc)
    doc["run"]["mode"] = "independent"
    assert parse_mapping(doc).effective_discount_rule == "B13"


def test_minimal_config_gets_defaults(tmp_path):
    cfg = parse_config(_toml(tmp_path, '[run]\nsources = ["mortality"]\n'))
    assert cfg == RunConfig(sources=("mortality",))
    assert cfg.pulse_tons == 1e9


def test_every_violation_listed():
    doc = {"run": {"gas": "sf6", "n_trials": 0, "mode": "mixed", "quantiles": [1.5],
                   "sources": ["macro:Burke2015", "macro:Newell2021"]}}
    with pytest.raises(ConfigError) as err:
        parse_mapping(doc)
    text = "\n".join(err.value.problems)
    for needle in ("run.gas", "n_trials", "run.mode", "quantile 1.5", "one macro study"):
        assert needle in text
    assert len(err.value.problems) >= 5


def test_type_errors_and_unknown_sections():
    with pytest.raises(ConfigError) as err:
        parse_mapping({"run": {"seed": "x", "sources": ["mortality"]}, "extras": {}})
    text = "\n".join(err.value.problems)
    assert "run.seed" in text or "config.seed" in text
    assert "extras" in text


def test_sources_required_when_asked():
    with pytest.raises(ConfigError, match="at least one"):
        parse_mapping({"run": {"sources": []}})
    assert parse_mapping({"run": {"sources": []}}, require_sources=False).sources == ()


def test_mapping_round_trip():
    cfg = parse_config(ROOT / "configs" / "example.toml")
    assert parse_mapping(to_mapping(cfg)) == cfg


def test_irf_rows_sorted_and_banded(tmp_path):
    specs = [M.load_spec(n) for n in ("Newell2021", "Burke2015", "Harding2023")]
    path = io.emit_figure_data("irf", specs, tmp_path / "irf.csv", horizon=5)
    lines = path.read_text().splitlines()
    assert lines[0] == "study,horizon,response,lo95,hi95"
    keys = [(r.split(",")[0], int(r.split(",")[1])) for r in lines[1:]]
    assert keys == sorted(keys) and len(keys) == 18
    burke = [r.split(",") for r in lines[1:] if r.startswith("Burke2015")]
    harding = [r.split(",") for r in lines[1:] if r.startswith("Harding2023")]
    assert all(r[3] and r[4] for r in burke)
    assert all(r[3] == "" and r[4] == "" for r in harding)


def test_surface_kinds(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.uniform(1.0, 5.0, 300)
    loss = 0.01 * t + 0.002 * t * t + rng.normal(0, 0.002, 300)
    path = io.emit_figure_data("surface", [("b", t, loss), ("a", t, loss)], tmp_path / "s.csv")
    rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    kinds = {r[1] for r in rows}
    assert kinds == {"point", "mean", "q05", "q95"}
    assert sum(1 for r in rows if r[0] == "a" and r[1] == "point") == 300


def test_unknown_figure_kind(tmp_path):
    with pytest.raises(ValueError):
        io.emit_figure_data("pie", [], tmp_path / "x.csv")


def test_repeated_emission_is_byte_identical(tmp_path):
    specs = [M.load_spec(n) for n in M.STUDY_FAMILY]
    a = io.emit_figure_data("irf", specs, tmp_path / "a.csv").read_bytes()
    b = io.emit_figure_data("irf", specs, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_formats_cover_run_outputs():
    for name in RUN_OUTPUTS + ("irf.csv", "surface.csv", "manifest.json"):
        assert name in io.FORMATS


def test_fmt():
    assert io.fmt(None) == "" and io.fmt(float("nan")) == ""
    assert io.fmt(np.int64(3)) == "3" and io.fmt(0.1) == "0.1"


# ---------------------------------------------------------------- CLI


SMALL = ["--trials", "8", "--seed", "3"]


def _small_cfg(tmp_path):
    return _toml(tmp_path, '[run]\nsources = ["macro:Harding2023", "mortality"]\n[params]\nn_sets = 50\n',
                 "small.toml")


def test_cli_run_and_manifest_rerun(tmp_path, run_cli):
    cfg = _small_cfg(tmp_path)
    run_cli("run", "--config", str(cfg), *SMALL, "--out", "a")
    out_a = tmp_path / "a"
    for name in RUN_OUTPUTS + ("manifest.json",):
        assert (out_a / name).is_file()
    doc = json.loads((out_a / "manifest.json").read_text())
    assert doc["seeds"] == [3] and doc["outputs"]["scghg_table.csv"]
    run_cli("run", "--manifest", str(out_a / "manifest.json"), "--out", "b")
    for name in RUN_OUTPUTS:
        assert (tmp_path / "b" / name).read_bytes() == (out_a / name).read_bytes(), name


def test_cli_empty_quantiles_gives_mean_only_table(tmp_path, run_cli):
    run_cli("run", "--config", str(_small_cfg(tmp_path)), *SMALL, "--quantiles", "", "--out", "o")
    head = (tmp_path / "o" / "scghg_table.csv").read_text().splitlines()[0]
    assert head == "source,gas,mode,market,nonmarket,total"


def test_cli_config_error_exit_2(tmp_path, run_cli):
    bad = _toml(tmp_path, "[run]\npluse_year = 2030\n")
    proc = run_cli("run", "--config", str(bad), "--out", "o", check=False)
    assert proc.returncode == 2 and "pluse_year" in proc.stderr


def test_cli_validation_error_exit_3(tmp_path, run_cli):
    ens = synth_ensemble(2, seed=1)
    path = tmp_path / "s.csv"
    write_ensemble(ens, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(l for l in lines if ",2150," not in l) + "\n")
    proc = run_cli("validate", "--scenario", str(path), check=False)
    assert proc.returncode == 3 and "2150" in proc.stderr


def test_cli_numerical_error_exit_4(tmp_path, run_cli):
    ens = synth_ensemble(4, seed=2)
    co2 = ens.co2.copy()
    co2[1, 50:] = 1e306
    import dataclasses
    write_ensemble(dataclasses.replace(ens, co2=co2), tmp_path / "s.csv")
    cfg = _toml(tmp_path, f'[run]\nsources = ["macro:Harding2023"]\n[scenario]\npath = "{tmp_path / "s.csv"}"\n'
                          '[params]\nn_sets = 20\n')
    proc = run_cli("run", "--config", str(cfg), "--trials", "4", "--out", "o", check=False,
                   env={"PYTHONWARNINGS": "ignore"})
    assert proc.returncode == 4 and "trial 1" in proc.stderr


def test_cli_validate_passes(run_cli):
    proc = run_cli("validate")
    assert proc.stdout.count("PASS") == 6 and "FAIL" not in proc.stdout


def test_cli_irf_and_calibrate(tmp_path, run_cli):
    run_cli("irf", "--study", "Harding2023,Burke2015", "--horizon", "4", "--out", "irf")
    rows = (tmp_path / "irf" / "irf.csv").read_text().splitlines()
    assert len(rows) == 11 and rows[1].startswith("Burke2015,0,")
    proc = run_cli("calibrate", "--trials", "200", "--seed", "1", "--out", "cal")
    doc = json.loads((tmp_path / "cal" / "calibration.json").read_text())
    assert abs(doc["near_residual"]) < 1e-8 and doc["rho"] >= 0
    assert json.loads(proc.stdout)["eta"] == doc["eta"]
