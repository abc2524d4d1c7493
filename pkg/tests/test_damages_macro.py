import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scghg.damages import macro as M
from scghg.errors import ConfigError, FitError, NoOptimumError
from scghg.patterns import UsTempPath
from scghg.scenario import synth_ensemble

SPECS = {s.study: s for s in M.all_specs(include_irf_only=True)}


def _quad(b1, b2, t):
    return b1 * t + b2 * t * t


def _gap(spec, path, gdp=None, backend="numpy"):
    """Log gap for a single path, padding history at t_base."""
    h = M.history_needed(spec)
    temps = np.concatenate([np.full(h, spec.t_base), np.asarray(path, dtype=float)])
    return M.log_gap(spec, temps[None, :], h, gdp, backend)[0]


# ---------------------------------------------------------------- payloads


def test_every_study_has_its_family():
    for study, family in M.STUDY_FAMILY.items():
        assert SPECS[study].family == family
    assert SPECS["DJO2012"].irf_only


def test_payload_rejects_unknown_and_missing_keys():
    d = SPECS["Harding2023"].to_dict()
    d["coefficients"]["carry_over"] = 0.5
    with pytest.raises(ConfigError, match="carry_over"):
        M.spec_from_mapping(d)
    d = SPECS["Harding2023"].to_dict()
    del d["coefficients"]["carry"]
    with pytest.raises(ConfigError, match="carry"):
        M.spec_from_mapping(d)


def test_payload_invariants():
    with pytest.raises(ConfigError):
        SPECS["Harding2023"].with_coefficients(carry=1.0)
    with pytest.raises(ConfigError):
        SPECS["Kahn2021"].with_coefficients(window=0)


def test_unknown_study():
    with pytest.raises(ConfigError):
        M.load_spec("Nobody1999")


# ---------------------------------------------------------------- run_damage


@pytest.mark.parametrize("study", list(M.STUDY_FAMILY))
@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_zero_anomaly_is_exactly_zero(study, backend):
    spec = SPECS[study]
    gdp = 1e12 * np.cumprod(np.full(281, 1.02))[None, :]
    assert np.all(_gap(spec, np.full(281, spec.t_base), gdp, backend) == 0.0)


def test_convergence_geometric_decay():
    spec = SPECS["Harding2023"]
    path = np.full(60, spec.t_base)
    path[5] += 1.0
    gap = _gap(spec, path)
    mu = _quad(spec.c("beta1"), spec.c("beta2"), spec.t_base + 1) - _quad(spec.c("beta1"), spec.c("beta2"), spec.t_base)
    k = np.arange(55)
    np.testing.assert_allclose(gap[5:], mu * 0.81 ** k, rtol=0, atol=1e-9)
    assert np.all(gap[:5] == 0.0)


def test_growth_vs_level_on_a_ramp():
    """Same quadratic as a growth wedge and as a level effect."""
    newell = SPECS["Newell2021"]
    b1, b2 = newell.c("beta1"), newell.c("beta2")
    growth = M.MacroSpec("Burke2015", "PermanentGrowth", {"beta1": [b1], "beta2": [b2]}, newell.t_base)
    path = newell.t_base + np.linspace(0.0, 3.0, 81)
    g_growth = _gap(growth, path)
    g_level = _gap(newell, path)
    w = _quad(b1, b2, path) - _quad(b1, b2, newell.t_base)
    np.testing.assert_allclose(g_level, w, rtol=1e-12)
    np.testing.assert_allclose(g_growth, np.cumsum(w), rtol=1e-12)
    assert -g_growth[-1] > -g_level[-1] > 0
    # holding the end temperature, the growth loss keeps rising and the level loss does not
    longer = np.concatenate([path, np.full(200, path[-1])])
    g_long = _gap(growth, longer)
    assert g_long[-1] == pytest.approx(g_growth[-1] + 200 * w[-1], rel=1e-12)
    assert np.all(np.diff(g_long[80:]) < 0)
    assert _gap(newell, longer)[-1] == pytest.approx(g_level[-1], rel=1e-12)


def test_run_damage_on_scenario_grid():
    ens = synth_ensemble(1, seed=0)
    spec = SPECS["Casey2023"]
    years = np.arange(1990, 2301)
    level = spec.t_base + np.clip((years - 2020) * 0.03, 0, None)
    out = M.run_damage(spec, UsTempPath(years, level), ens[0])
    assert np.array_equal(out.years, ens.years)
    assert np.all(out.loss_frac > -1) and out.loss_frac[-1] > 0


def test_run_damage_misaligned():
    ens = synth_ensemble(1, seed=0)
    with pytest.raises(ValueError):
        M.run_damage(SPECS["Newell2021"], UsTempPath(np.arange(2021, 2300), np.full(279, 15.0)), ens[0])
    with pytest.raises(ConfigError):
        M.run_damage(SPECS["DJO2012"], UsTempPath(ens.years, np.full(281, 15.0)), ens[0])


def test_kahn_driver_vanishes_after_window():
    spec = SPECS["Kahn2021"]
    path = np.full(120, spec.t_base)
    path[10:] += 1.0
    h = M.history_needed(spec)
    temps = np.concatenate([np.full(h, spec.t_base), path])[None, :]
    driver = M.ardl_driver(spec, temps, h)[0]
    assert np.all(driver[10 + spec.c("window"):] == 0.0)
    assert np.all(driver[10:10 + spec.c("window")] > 0.0)


def test_kahn_counterfactual_trend_shifts_gap():
    spec = SPECS["Kahn2021"].with_coefficients(cf_trend=0.02)
    path = spec.t_base + 0.02 * np.arange(100)
    # following the counterfactual trend exactly gives no damage
    h = M.history_needed(spec)
    temps = spec.t_base + 0.02 * (np.arange(h + 100) - h)
    assert np.max(np.abs(M.log_gap(spec, temps[None, :], h, backend="numpy"))) < 1e-15
    assert np.any(_gap(SPECS["Kahn2021"], path) != 0.0)


# ---------------------------------------------------------------- impulse responses


def test_level_quadratic_irf():
    spec = SPECS["Newell2021"]
    r = M.impulse_response(spec, 16.3, 20)
    deriv = spec.c("beta1") + 2 * spec.c("beta2") * 16.3
    assert r[0] == pytest.approx(deriv, rel=1e-9)
    assert np.all(r[1:] == 0.0)


def test_permanent_growth_irf_constant():
    r = M.impulse_response(SPECS["Burke2015"], 16.3, 50)
    np.testing.assert_allclose(r, r[0], rtol=1e-12)
    assert r[0] != 0.0


@pytest.mark.parametrize("study", ["Kalkuhl2020", "Acevedo2020", "Newell2021"])
def test_finite_lag_irf_zero_after_last_lag(study):
    spec = SPECS[study]
    r = M.impulse_response(spec, 16.3, 30)
    last = M.history_needed(spec)
    assert r[last] != 0.0
    assert np.all(r[last + 1:] == 0.0)


def test_convergence_irf_ratio():
    r = M.impulse_response(SPECS["Harding2023"], 16.3, 40)
    np.testing.assert_allclose(r[1:] / r[:-1], 0.81, rtol=0, atol=1e-9)


def test_solow_irf_tail_matches_capital_eigenvalue():
    spec = SPECS["Casey2023"]
    s, a, d = spec.c("savings"), spec.c("capital_share"), spec.c("depreciation")
    # flat GDP: output-capital ratio r = d/s, so the linearized capital gap
    # shrinks by (s r a + 1 - d) / (s r + 1 - d) each year
    sr = d
    lam = (sr * a + 1 - d) / (sr + 1 - d)
    r = M.impulse_response(spec, 16.3, 200)
    tail = r[41:120] / r[40:119]
    np.testing.assert_allclose(tail, lam, rtol=1e-6)
    peak = int(np.argmax(np.abs(r)))
    half_life = math.log(0.5) / math.log(lam)
    assert np.isfinite(half_life)
    h5 = peak + math.ceil(math.log(0.05) / math.log(lam)) + 5
    assert abs(r[h5]) < 0.05 * abs(r[peak])
    assert np.all(np.abs(r[peak + 3:]) <= np.abs(r[peak + 2:-1]) + 1e-18)


def test_finite_method_matches_marginal_for_quadratics():
    spec = SPECS["Harding2023"]
    m = M.impulse_response(spec, 16.3, 10, "marginal")
    f_up = M.impulse_response(spec, 16.3, 10, "finite", shock=1.0)
    f_dn = M.impulse_response(spec, 16.3, 10, "finite", shock=-1.0)
    np.testing.assert_allclose((f_up - f_dn) / 2, m, rtol=1e-6)


def test_irf_band():
    lo, hi = M.impulse_band(SPECS["Burke2015"], 16.3, 10)
    r = M.impulse_response(SPECS["Burke2015"], 16.3, 10)
    assert np.all(lo < r) and np.all(r < hi)
    assert M.impulse_band(SPECS["Harding2023"]) == (None, None)


def test_irf_horizon_validation():
    with pytest.raises(ValueError):
        M.impulse_response(SPECS["Newell2021"], 16.3, 0)


# ---------------------------------------------------------------- optima


@pytest.mark.parametrize("study,expected", [
    ("Kalkuhl2020", 5.4), ("Nath2024", 13.0), ("Harding2023", 13.2), ("Acevedo2020", 13.0),
])
def test_optimum_anchors(study, expected):
    assert M.optimum_of(SPECS[study]) == pytest.approx(expected, rel=1e-12)


def test_optimum_edge_cases():
    assert M.quadratic_optimum(0.0, -0.001) == 0.0
    with pytest.raises(NoOptimumError):
        M.quadratic_optimum(0.01, 0.0)
    with pytest.raises(NoOptimumError):
        M.optimum_of(SPECS["Kahn2021"])


@settings(max_examples=200, deadline=None)
@given(b1=st.floats(1e-3, 0.05), b2=st.floats(-2e-3, -1e-5), t=st.floats(-5.0, 40.0),
       scale=st.floats(0.1, 10.0))
def test_marginal_damage_sign(b1, b2, t, scale):
    opt = M.quadratic_optimum(b1, b2)
    if abs(t - opt) < 1e-3:
        return
    delta = 1e-3
    for k in (1.0, scale):
        loss = _quad(k * b1, k * b2, t) - _quad(k * b1, k * b2, t + delta)
        assert (loss > 0) == (t > opt)


@settings(max_examples=60, deadline=None)
@given(bumps=st.lists(st.floats(0.0, 1.0), min_size=80, max_size=80),
       study=st.sampled_from(["Burke2015", "Newell2021", "Harding2023"]))
def test_hotter_paths_lose_more(bumps, study):
    spec = SPECS[study]
    base = max(M.optimum_of(spec), spec.t_base) + np.linspace(0.5, 3.0, 80)
    hot = base + np.array(bumps)
    assert -_gap(spec, hot)[-1] >= -_gap(spec, base)[-1] - 1e-15


def test_crr_curve_matches_knots_away_from_corners():
    c = SPECS["Nath2024"].coefficients
    kn, v = c["knots"], c["values"]
    w = c["smoothing"]
    for k in range(len(kn)):
        if k in (0, len(kn) - 1) or w == 0:
            assert M.crr_curve(kn[k], kn, v, w) == pytest.approx(v[k], abs=1e-15)
    mid = 0.5 * (kn[0] + kn[1])
    if mid < kn[1] - w:
        assert M.crr_curve(mid, kn, v, w) == pytest.approx(0.5 * (v[0] + v[1]), rel=1e-12)


# ---------------------------------------------------------------- surface fit


def test_surface_fit_recovers_noiseless_quadratic():
    t = np.linspace(0.5, 5.0, 80)
    fit = M.fit_damage_surface(0.01 * t + 0.002 * t * t, t)
    assert fit.mean == pytest.approx((0.01, 0.002), abs=1e-8)


def _pinball(r, tau):
    return np.sum(np.where(r >= 0, tau * r, (tau - 1) * r))


def test_quantile_curves_bracket_mean_and_beat_grid():
    rng = np.random.default_rng(3)
    t = rng.uniform(0.5, 5.0, 200)
    y = 0.01 * t + 0.002 * t * t + np.where(rng.uniform(size=200) < 0.5, -1, 1) * 0.002 * t
    fit = M.fit_damage_surface(y, t)
    grid = np.linspace(t.min(), t.max(), 50)
    assert np.all(fit.curve("q05", grid) <= fit.curve("mean", grid))
    assert np.all(fit.curve("mean", grid) <= fit.curve("q95", grid))
    X = np.column_stack([t, t * t])
    for tau, which in ((0.05, "q05"), (0.95, "q95")):
        best = _pinball(y - X @ np.array(getattr(fit, which)), tau)
        coarse = min(_pinball(y - X @ np.array([a, b]), tau)
                     for a in np.linspace(0.0, 0.03, 61) for b in np.linspace(-0.002, 0.006, 61))
        assert best <= coarse + 1e-12


def test_surface_fit_errors():
    with pytest.raises(FitError):
        M.fit_damage_surface(np.ones(80), np.full(80, 2.0))
    with pytest.raises(FitError):
        M.fit_damage_surface(np.ones(10), np.linspace(1, 2, 10))


# ---------------------------------------------------------------- backends


@pytest.mark.parametrize("study", ["Harding2023", "Casey2023", "Kahn2021"])
def test_recursive_families_agree_across_backends(study):
    spec = SPECS[study]
    rng = np.random.default_rng(1)
    h = M.history_needed(spec)
    temps = spec.t_base + np.cumsum(rng.normal(0.02, 0.2, (16, h + 281)), axis=1)
    gdp = 1e12 * np.cumprod(np.full((16, 281), 1.018), axis=1)
    a = M.log_gap(spec, temps, h, gdp, "numpy")
    b = M.log_gap(spec, temps, h, gdp, "numba")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
