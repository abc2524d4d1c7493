import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scghg.errors import ConfigError, SchemaError, ValidationError
from scghg.scenario import (
    COLUMNS, ScenarioEnsemble, SynthTargets, growth_path, load_ensemble, synth_ensemble,
    write_ensemble,
)


@pytest.fixture(scope="module")
def two_trials():
    return synth_ensemble(2, seed=3)


def test_round_trip_two_trials(tmp_path, two_trials):
    path = tmp_path / "s.csv"
    write_ensemble(two_trials, path)
    back = load_ensemble(path)
    assert back.n_trials == 2
    assert back.years[0] == 2020 and back.years[-1] == 2300
    for name in ("pop", "gdp", "co2", "ch4", "n2o"):
        np.testing.assert_array_equal(getattr(back, name), getattr(two_trials, name))
    assert back.checksum == two_trials.checksum


def _rows(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1:]


def test_gap_year_is_reported(tmp_path, two_trials):
    path = tmp_path / "s.csv"
    write_ensemble(two_trials, path)
    head, rows = _rows(path)
    rows = [r for r in rows if r.split(",")[1] != "2150"]
    path.write_text("\n".join([head, *rows]) + "\n")
    with pytest.raises(ValidationError, match="2150"):
        load_ensemble(path)


def test_zero_gdp_cell_is_reported(tmp_path, two_trials):
    path = tmp_path / "s.csv"
    write_ensemble(two_trials, path)
    head, rows = _rows(path)
    k = next(i for i, r in enumerate(rows) if r.startswith("1,2077,"))
    parts = rows[k].split(",")
    parts[COLUMNS.index("gdp")] = "0"
    rows[k] = ",".join(parts)
    path.write_text("\n".join([head, *rows]) + "\n")
    with pytest.raises(ValidationError, match=r"gdp.*trial 1, year 2077"):
        load_ensemble(path)


def test_missing_column_is_named(tmp_path, two_trials):
    path = tmp_path / "s.csv"
    write_ensemble(two_trials, path)
    text = path.read_text().replace("n2o", "nitrous", 1)
    path.write_text(text)
    with pytest.raises(SchemaError, match="n2o"):
        load_ensemble(path)


def test_synth_is_deterministic():
    a = synth_ensemble(5, seed=9)
    b = synth_ensemble(5, seed=9)
    for name in ("pop", "gdp", "co2", "ch4", "n2o"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_synth_trial_depends_only_on_its_id():
    small = synth_ensemble(3, seed=4)
    big = synth_ensemble(7, seed=4)
    np.testing.assert_array_equal(small.gdp, big.gdp[:3])


def test_degenerate_targets_rejected():
    with pytest.raises(ConfigError):
        synth_ensemble(2, seed=1, targets=SynthTargets(pop_peak_year=2010))
    with pytest.raises(ConfigError):
        synth_ensemble(0, seed=1)


def test_growth_path_constant_income_is_zero():
    years = np.arange(2020, 2031)
    ens = ScenarioEnsemble(years, np.full((1, 11), 2.0), np.full((1, 11), 6.0),
                           np.ones((1, 11)), np.ones((1, 11)), np.ones((1, 11)))
    np.testing.assert_array_equal(growth_path(ens[0]), np.zeros(10))


def test_growth_path_doubling_income_is_one():
    years = np.arange(2020, 2031)
    ens = ScenarioEnsemble(years, np.ones((1, 11)), 2.0 ** np.arange(11)[None, :],
                           np.ones((1, 11)), np.ones((1, 11)), np.ones((1, 11)))
    np.testing.assert_array_equal(growth_path(ens[0]), np.ones(10))


def test_growth_path_matches_hand_arithmetic(two_trials):
    t = two_trials[1]
    g = growth_path(t)
    assert g.size == t.years.size - 1
    for year in (2021, 2050, 2101, 2222, 2300):
        k = year - 2020
        pc_now = float(t.gdp[k]) / float(t.population[k])
        pc_prev = float(t.gdp[k - 1]) / float(t.population[k - 1])
        assert g[k - 1] == pytest.approx(pc_now / pc_prev - 1.0, rel=1e-12, abs=1e-15)


def test_synthetic_paths_positive_and_on_grid():
    ens = synth_ensemble(200, seed=5)
    for name in ("pop", "gdp", "co2", "ch4", "n2o"):
        assert np.all(getattr(ens, name) > 0)
    assert np.all(np.diff(ens.years) == 1)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**40))
def test_write_load_is_identity(tmp_path_factory, n, seed):
    ens = synth_ensemble(n, seed)
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    write_ensemble(ens, path)
    back = load_ensemble(path)
    for name in ("pop", "gdp", "co2", "ch4", "n2o"):
        assert getattr(back, name).tobytes() == getattr(ens, name).tobytes()
