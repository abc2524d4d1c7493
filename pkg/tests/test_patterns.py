import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scghg import patterns as P
from scghg.climate import GmstPath
from scghg.errors import ConfigError

# published TCR, ECS and weighted sum for the four bundled models
TABLE = {
    "NorESM2-LM": (1.48, 2.60, 1.43),
    "GFDL-ESM4": (1.61, 2.62, 1.50),
    "MPI-ESM1-2-HR": (1.65, 2.97, 1.62),
    "EC-Earth3-Veg": (2.61, 4.30, 2.45),
}
RANKED = ["NorESM2-LM", "GFDL-ESM4", "MPI-ESM1-2-HR", "EC-Earth3-Veg"]


@pytest.fixture(scope="module")
def gcms():
    return P.load_gcms()


def test_bundled_tcr_ecs_match_table(gcms):
    for g in gcms:
        assert (g.tcr, g.ecs) == TABLE[g.name][:2]


@pytest.mark.parametrize("name", RANKED)
def test_weighted_sum_values(gcms, name):
    g = next(x for x in gcms if x.name == name)
    assert P.weighted_sum(g) == pytest.approx(TABLE[name][2], abs=0.03)


def test_weighted_sum_identity():
    g = P.GcmPattern("mid", 2.0, 3.78, 1.0)
    assert P.weighted_sum(g, (2.0, 3.78)) == 2.0


def test_weighted_sum_rejects_bad_means(gcms):
    with pytest.raises(ConfigError):
        P.weighted_sum(gcms[0], (0.0, 3.0))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.75, 1.25), st.floats(0.75, 1.25))
def test_rank_order_stable_under_mean_perturbation(a, b):
    ranked = P.rank_gcms(P.load_gcms(), (2.0 * a, 3.78 * b))
    assert [g.name for g in ranked] == RANKED


def test_pairing_2237(gcms):
    w = np.random.default_rng(0).normal(3.0, 0.5, 2237)
    tab = P.build_pairing(w, P.rank_gcms(gcms))
    assert tab.group_sizes == (560, 559, 559, 559)
    assert sorted(tab.assignments) == list(range(2237))


def test_pairing_eight_sets(gcms):
    w = np.arange(8, dtype=float)
    tab = P.build_pairing(w, P.rank_gcms(gcms))
    assert tab.group_sizes == (2, 2, 2, 2)
    assert tab.gcm_for(6) == tab.gcm_for(7) == "EC-Earth3-Veg"
    assert tab.gcm_for(0) == "NorESM2-LM"


def test_pairing_remainder_goes_to_coolest(gcms):
    tab = P.build_pairing(np.arange(5.0), P.rank_gcms(gcms))
    assert tab.group_sizes == (2, 1, 1, 1)


def test_pairing_empty_inputs(gcms):
    with pytest.raises(ValueError):
        P.build_pairing([], gcms)
    with pytest.raises(ValueError):
        P.build_pairing([1.0], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 6.0), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_pairing_is_monotone_and_order_free(warmths, rnd):
    gcms = P.rank_gcms(P.load_gcms())
    w = np.array(warmths)
    tab = P.build_pairing(w, gcms)
    rank = {g.name: k for k, g in enumerate(gcms)}
    assert sorted(tab.assignments) == list(range(w.size))
    assert max(tab.group_sizes) - min(tab.group_sizes) <= 1
    for i in range(w.size):
        for j in range(w.size):
            if (w[i], i) < (w[j], j):
                assert rank[tab.gcm_for(i)] <= rank[tab.gcm_for(j)]
    perm = list(range(w.size))
    rnd.shuffle(perm)
    shuffled = P.build_pairing(w[perm], gcms, ids=np.array(perm))
    assert shuffled.assignments == tab.assignments


def test_downscale_at_window_mean_is_baseline():
    years = np.arange(1970, 2101)
    g = GmstPath(years, np.full(years.size, 0.8))
    out = P.downscale(g, P.GcmPattern("x", 1.5, 3.0, 1.3))
    np.testing.assert_allclose(out.level, 13.62, rtol=0, atol=1e-12)


def test_identity_pattern_tracks_gmst():
    years = np.arange(1850, 2101)
    anom = np.linspace(0.0, 3.0, years.size)
    out = P.downscale(GmstPath(years, anom), P.GcmPattern("x", 1.5, 3.0, 1.0), regressor="preindustrial")
    np.testing.assert_allclose(out.level - 13.62, anom, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-3.0, 3.0), slope=st.floats(0.5, 2.0))
def test_downscale_is_affine(a, slope):
    years = np.arange(1950, 2101)
    g = np.sin(np.arange(years.size) / 7.0) + np.linspace(0, 2, years.size)
    pat = P.GcmPattern("x", 1.5, 3.0, slope, 0.2)
    zero = P.downscale(GmstPath(years, np.zeros(years.size)), pat).level
    one = P.downscale(GmstPath(years, g), pat).level
    scaled = P.downscale(GmstPath(years, a * g), pat).level
    np.testing.assert_allclose(scaled - zero, a * (one - zero), atol=1e-10)


def test_pairing_csv(tmp_path, gcms):
    tab = P.build_pairing(np.arange(4.0), P.rank_gcms(gcms))
    tab.write_csv(tmp_path / "pairing.csv")
    lines = (tmp_path / "pairing.csv").read_text().splitlines()
    assert lines[0] == "param_id,gcm" and lines[1] == "0,NorESM2-LM"


def test_historical_mae_zero_for_consistent_series():
    years = np.arange(1950, 2021)
    gmst = np.linspace(0.2, 1.2, years.size)
    pat = P.GcmPattern("x", 1.5, 3.0, 1.2)
    us = P.downscale(GmstPath(years, gmst), pat).level
    assert P.historical_mae(years, gmst, us, pat) == pytest.approx(0.0, abs=1e-12)
