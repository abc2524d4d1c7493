import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scghg import climate as C
from scghg.errors import ConfigError
from scghg.feedbacks import (
    AmazonState, FeedbackConfig, HazardParams, PermafrostParams, PermafrostState, amazon_step,
    feedback_arrays, make_hook, permafrost_step, sample_feedback_states,
)
from scghg.kernels.climate import C_TO_CH4_MT, C_TO_CO2
from scghg.rng import Distribution


def _run_amazon(state, gmst, years):
    total, per_year = 0.0, []
    for _ in range(years):
        state, e = amazon_step(state, gmst)
        per_year.append(e)
        total += e
    return state, total, per_year


def test_below_threshold_never_triggers():
    s, total, _ = _run_amazon(AmazonState(0.0, 50.0), 0.9, 300)
    assert not s.triggered and total == 0.0


def test_duration_ten_releases_budget_evenly():
    s, total, per_year = _run_amazon(AmazonState(0.0, 10.0), 3.0, 30)
    assert per_year[:10] == pytest.approx([18.3] * 10, rel=1e-12)
    assert all(e == 0.0 for e in per_year[10:])
    assert total == pytest.approx(183.0, rel=1e-12) and s.released == 183.0


def test_duration_fifty_sum_oracle():
    _, total, per_year = _run_amazon(AmazonState(0.0, 50.0), 3.0, 80)
    assert per_year[0] == pytest.approx(3.66, rel=1e-12)
    assert abs(sum(per_year) - 183.0) <= 1e-9 * 183.0
    assert sum(1 for e in per_year if e > 0) == 50


def test_trigger_rule_uses_u():
    h = HazardParams(slope=0.1, threshold=1.0)
    assert h.probability(3.0) == pytest.approx(0.2)
    s, _ = amazon_step(AmazonState(0.25, 50.0, hazard=h), 3.0)
    assert not s.triggered
    s, _ = amazon_step(AmazonState(0.15, 50.0, hazard=h), 3.0)
    assert s.triggered
    with pytest.raises(ValueError):
        amazon_step(AmazonState(1.5, 50.0), 3.0)


@settings(max_examples=100, deadline=None)
@given(dur=st.floats(10.0, 250.0), horizon=st.integers(1, 300))
def test_amazon_release_never_exceeds_budget(dur, horizon):
    s, total, _ = _run_amazon(AmazonState(0.0, dur), 5.0, horizon)
    assert total <= 183.0 * (1 + 1e-12)
    if horizon >= np.ceil(dur):
        assert abs(total - 183.0) <= 1e-9 * 183.0


PF = PermafrostParams(1000.0, 0.002, 0.05, 0.03, 0.4)


def test_permafrost_no_thaw_when_cool():
    s = PermafrostState.initial(PF)
    for g in (0.0, -1.0, -0.5):
        s, co2, ch4 = permafrost_step(s, g)
        assert co2 == 0.0 and ch4 == 0.0
    assert s.frozen == 1000.0


def test_permafrost_mass_balance_300_years():
    s = PermafrostState.initial(PF)
    emitted = 0.0
    for t in range(300):
        s, co2, ch4 = permafrost_step(s, 0.02 * t)
        emitted += co2 / C_TO_CO2 + ch4 / C_TO_CH4_MT
    total = s.frozen + s.active + s.passive + emitted
    assert abs(total - PF.frozen0) <= 1e-9 * PF.frozen0
    assert min(s.frozen, s.active, s.passive) >= 0.0


def test_all_passive_never_emits():
    s = PermafrostState.initial(dataclasses.replace(PF, passive_frac=1.0))
    for t in range(300):
        s, co2, ch4 = permafrost_step(s, 4.0)
        assert co2 == 0.0 and ch4 == 0.0
    assert s.frozen < PF.frozen0


def test_sampling_is_deterministic():
    assert sample_feedback_states(5, 17) == sample_feedback_states(5, 17)
    assert sample_feedback_states(5, 17) != sample_feedback_states(5, 18)


def test_duration_triangular_mean():
    durs = np.array([sample_feedback_states(1, t)[0].duration for t in range(20_000)])
    assert durs.min() >= 10.0 and durs.max() <= 250.0
    assert durs.mean() == pytest.approx(310.0 / 3.0, abs=2.0)


def test_truncation_keeps_params_nonnegative():
    cfg = FeedbackConfig(thaw_rate=Distribution("truncnormal", (1e-4, 2e-4)))
    for t in range(3000):
        p = sample_feedback_states(2, t, cfg)[1].params
        assert min(p.frozen0, p.thaw_rate, p.decomp_rate, p.ch4_frac, p.passive_frac) >= 0.0


def test_bad_distribution_is_config_error():
    with pytest.raises(ConfigError):
        Distribution("triangular", (50.0, 10.0, 250.0))
    with pytest.raises(ConfigError):
        FeedbackConfig.from_toggle("sometimes")
    assert FeedbackConfig(duration=Distribution("normal", (50.0, 5.0))).problems()


# ---------------------------------------------------------------- coupled runs


def _scenario_em(n=None):
    """One 1-D path, or n identical rows."""
    years = np.arange(2020, 2301)
    co2 = np.interp(years, [2020, 2100, 2300], [45.0, 60.0, 20.0])
    shape = (years.size,) if n is None else (n, years.size)
    em = C.Emissions(years, np.broadcast_to(co2, shape).copy(), np.full(shape, 380.0), np.full(shape, 11.0))
    return C.with_history(em, C.ClimateConfig())


def test_kernel_matches_step_functions():
    p = C.central_params()
    cfg = FeedbackConfig(hazard=HazardParams(0.3, 1.0))
    em = _scenario_em()
    for trial in range(4):
        hook = make_hook(3, trial, cfg)
        ref = C.run_emulator(em, p, feedback_hook=hook).anomaly
        fb = feedback_arrays(3, [trial], cfg)
        for backend in ("numpy", "numba"):
            out = C.simulate(em, C.ParamTable.from_sets([p]), None, fb, cfg.start_year, backend)
            np.testing.assert_allclose(out.gmst[0], ref, rtol=1e-12, atol=1e-12)


def test_feedbacks_never_cool():
    p = C.central_params()
    em = _scenario_em(8)
    tab = C.ParamTable.from_sets([p] * 8)
    off = C.simulate(em, tab, feedbacks=feedback_arrays(1, range(8), FeedbackConfig.from_toggle("off")))
    on = C.simulate(em, tab, feedbacks=feedback_arrays(1, range(8), FeedbackConfig(hazard=HazardParams(0.3, 1.0))))
    assert np.all(on.gmst >= off.gmst - 1e-12)
    assert np.any(on.gmst > off.gmst + 0.01)


def test_off_toggle_is_bit_exact():
    p = C.central_params()
    em = _scenario_em(3)
    tab = C.ParamTable.from_sets([p] * 3)
    plain = C.simulate(em, tab).gmst
    off = C.simulate(em, tab, feedbacks=feedback_arrays(9, range(3), FeedbackConfig.from_toggle("off"))).gmst
    assert plain.tobytes() == off.tobytes()


def test_amazon_total_in_coupled_run():
    p = C.central_params()
    cfg = FeedbackConfig(permafrost=False, hazard=HazardParams(1.0, 0.0),
                         duration=Distribution("fixed", (40.0,)))
    em = _scenario_em()
    res = C.simulate(em, C.ParamTable.from_sets([p]), None, feedback_arrays(0, [0], cfg), cfg.start_year)
    assert abs(res.fb_co2.sum() - 183.0) <= 1e-9 * 183.0
