"""Nonmarket damages: temperature mortality, wildfire-smoke mortality and
biodiversity nonuse value, monetized with an income-scaled VSL.

Array functions accept (years,) or (trials, years) inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FitError
from ..rng import Distribution, trial_rng

BASE_INCOME = 63_500.0


@dataclass(frozen=True)
class VslParams:
    base_vsl: float = 10.05e6
    elasticity: float = 1.0
    base_income: float = BASE_INCOME

    def problems(self) -> list[str]:
        p = []
        if not self.base_vsl > 0:
            p.append("nonmarket.vsl.base_vsl must be > 0")
        if not self.elasticity >= 0:
            p.append("nonmarket.vsl.elasticity must be >= 0")
        if not self.base_income > 0:
            p.append("nonmarket.vsl.base_income must be > 0")
        return p


def vsl_at(income, p: VslParams = VslParams()) -> np.ndarray:
    """VSL for per-capita income (elementwise)."""
    income = np.asarray(income, dtype=float)
    if np.any(income <= 0):
        raise ValueError("per-capita income must be > 0")
    return p.base_vsl * (income / p.base_income) ** p.elasticity


# ---------------------------------------------------------------- temperature mortality


@dataclass(frozen=True)
class MortalityResponse:
    """Excess deaths per capita as a piecewise-linear function of the U.S.
    temperature anomaly (degC above `t_base`), extrapolated linearly past the
    end knots. Heat and cold sides are both positive."""

    knots: tuple = (-2.0, 0.0, 2.0, 6.0)
    values: tuple = (1.0e-5, 0.0, 3.0e-5, 1.5e-4)
    t_base: float = 13.62

    def problems(self) -> list[str]:
        p = []
        k, v = np.asarray(self.knots, dtype=float), np.asarray(self.values, dtype=float)
        if k.size != v.size or k.size < 2:
            p.append("nonmarket.mortality: knots and values need equal length >= 2")
        elif np.any(np.diff(k) <= 0):
            p.append("nonmarket.mortality: knots must be strictly increasing")
        elif not np.any(k == 0.0) or v[k == 0.0][0] != 0.0:
            p.append("nonmarket.mortality: the curve must pass through (0, 0)")
        return p

    def rate(self, anomaly) -> np.ndarray:
        x = np.asarray(anomaly, dtype=float)
        k, v = np.asarray(self.knots, dtype=float), np.asarray(self.values, dtype=float)
        out = np.interp(x, k, v)
        lo = (v[1] - v[0]) / (k[1] - k[0])
        hi = (v[-1] - v[-2]) / (k[-1] - k[-2])
        out = np.where(x < k[0], v[0] + lo * (x - k[0]), out)
        return np.where(x > k[-1], v[-1] + hi * (x - k[-1]), out)


def mortality_deaths(us_temp, pop, resp: MortalityResponse = MortalityResponse()) -> np.ndarray:
    return resp.rate(np.asarray(us_temp, dtype=float) - resp.t_base) * np.asarray(pop, dtype=float)


def mortality_damages(us_temp, pop, income, resp: MortalityResponse = MortalityResponse(),
                      vsl: VslParams = VslParams()) -> np.ndarray:
    """Annual 2020USD. `income` is per-capita: exogenous, or net of macro
    losses for the integrated mode."""
    return mortality_deaths(us_temp, pop, resp) * vsl_at(income, vsl)


# ---------------------------------------------------------------- wildfire smoke


@dataclass(frozen=True)
class WildfireParams:
    slope: Distribution = Distribution("triangular", (2.70e-5, 4.03e-5, 5.36e-5))
    baseline_rate: float = 6.74e-5
    baseline_anomaly: float = 1.16
    ref_population: float = 351_764_939.0
    cap_year: int = 2055
    use_ref_population: bool = False

    def problems(self) -> list[str]:
        p = []
        lo = self.slope.params[0]
        if self.slope.family not in ("triangular", "uniform", "fixed") or lo < 0:
            p.append("nonmarket.wildfire.slope must be a non-negative bounded distribution")
        if not self.ref_population > 0:
            p.append("nonmarket.wildfire.ref_population must be > 0")
        return p


def sample_wildfire_slope(seed: int, trial_id: int, w: WildfireParams = WildfireParams()) -> float:
    return w.slope.sample(trial_rng(seed, trial_id, "wildfire"))


def wildfire_rate(years, gmst, slope, w: WildfireParams = WildfireParams()) -> np.ndarray:
    """Excess deaths per person; held at its cap-year value afterwards."""
    years = np.asarray(years)
    gmst = np.asarray(gmst, dtype=float)
    slope = np.asarray(slope, dtype=float)
    if gmst.ndim == 2:
        slope = slope.reshape(-1, 1)
    hit = np.flatnonzero(years == w.cap_year)
    if hit.size == 0:
        raise ValueError(f"wildfire cap year {w.cap_year} is not on the grid")
    rate = slope * np.maximum(0.0, gmst - w.baseline_anomaly)
    k = hit[0]
    rate[..., k + 1:] = rate[..., k:k + 1]
    return rate


def wildfire_deaths(years, gmst, pop, slope, w: WildfireParams = WildfireParams()) -> np.ndarray:
    rate = wildfire_rate(years, gmst, slope, w)
    if w.use_ref_population:
        return rate * w.ref_population
    return rate * np.asarray(pop, dtype=float)


def wildfire_damages(years, gmst, pop, income, slope, w: WildfireParams = WildfireParams(),
                     vsl: VslParams = VslParams()) -> np.ndarray:
    return wildfire_deaths(years, gmst, pop, slope, w) * vsl_at(income, vsl)


def _pinball(r, tau):
    return np.where(r >= 0, tau * r, (tau - 1.0) * r)


def fit_quantile_slope(x, y, tau: float) -> float:
    """No-intercept quantile regression slope, exact.

    The loss is convex and piecewise linear in the slope with kinks at the
    ratios y_i/x_i, so the minimum sits at a ratio. Sorting the ratios lets
    the subgradient be scanned in one pass; the smallest minimizer wins ties.
    Points with x == 0 do not depend on the slope and are ignored.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D and the same length")
    if not 0.0 < tau < 1.0:
        raise FitError("tau must lie in (0, 1)")
    keep = x != 0
    if not keep.any():
        raise FitError("all x are zero; slope is not identified")
    x, y = x[keep], y[keep]
    ratios = y / x
    order = np.argsort(ratios, kind="stable")
    r, ax = ratios[order], np.abs(x[order])
    pos = x[order] > 0
    # right derivative of the loss at b just above r_k:
    # sum over i with r_i <= b of w_i(b) minus the rest, where for x>0 a point
    # below b contributes (1-tau)|x| and above contributes -tau|x|; x<0 flips tau.
    w_below = np.where(pos, 1.0 - tau, tau) * ax
    w_above = np.where(pos, tau, 1.0 - tau) * ax
    total_above = w_above.sum()
    right = np.cumsum(w_below) - (total_above - np.cumsum(w_above))
    # first kink where the right derivative turns non-negative
    k = int(np.argmax(right >= -1e-15 * ax.sum()))
    return float(r[k])


def fit_quantile_slope_bruteforce(x, y, tau: float) -> float:
    """Reference: evaluate the pinball loss at every candidate ratio."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = x != 0
    if not keep.any():
        raise FitError("all x are zero; slope is not identified")
    cands = np.unique(y[keep] / x[keep])
    losses = np.array([_pinball(y - b * x, tau).sum() for b in cands])
    best = losses.min()
    return float(cands[np.flatnonzero(losses <= best + 1e-12 * max(1.0, abs(best)))[0]])


def synthetic_wildfire_cloud(seed: int = 0, n_models: int = 28, w: WildfireParams = WildfireParams()):
    """Stand-in for the 252-point model x pathway x epoch projection cloud.

    Each GCM gets its own smoke sensitivity; pathways and epochs set the
    warming above the 2011-2020 baseline. Returns (delta_gmst, excess_rate).
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x57494C44]))
    lo, mode, hi = w.slope.params if w.slope.family == "triangular" else (2.70e-5, 4.03e-5, 5.36e-5)
    # normal sensitivities with quartiles at lo and hi
    sd = (hi - lo) / (2 * 0.6744897501960817)
    sens = rng.normal(mode, sd, n_models)
    pathway_warming = np.array([[0.30, 0.45, 0.55], [0.35, 0.60, 0.85], [0.40, 0.70, 1.05]])
    dx, dy = [], []
    for m in range(n_models):
        model_scale = rng.lognormal(0.0, 0.15)
        for p in range(3):
            for e in range(3):
                x = pathway_warming[p, e] * model_scale
                dx.append(x)
                dy.append(sens[m] * x + rng.normal(0.0, 0.05 * sd))
    return np.array(dx), np.array(dy)


# ---------------------------------------------------------------- biodiversity


@dataclass(frozen=True)
class BiodiversityParams:
    """Saturating species loss in GMST anomaly and a per-capita WTP for
    avoiding total loss, scaled by income."""

    loss_coef: float = 0.05          # per degC^2
    wtp_per_capita: float = 150.0    # 2020USD at base income for total loss
    elasticity: float = 1.0
    base_income: float = BASE_INCOME
    baseline_anomaly: float = 0.0

    def problems(self) -> list[str]:
        p = []
        if not self.loss_coef >= 0:
            p.append("nonmarket.biodiversity.loss_coef must be >= 0")
        if not self.wtp_per_capita >= 0:
            p.append("nonmarket.biodiversity.wtp_per_capita must be >= 0")
        if not self.base_income > 0:
            p.append("nonmarket.biodiversity.base_income must be > 0")
        if not self.elasticity >= 0:
            p.append("nonmarket.biodiversity.elasticity must be >= 0")
        return p


def species_loss(gmst, b: BiodiversityParams = BiodiversityParams()) -> np.ndarray:
    d = np.maximum(0.0, np.asarray(gmst, dtype=float) - b.baseline_anomaly)
    s = b.loss_coef * d * d
    return s / (1.0 + s)


def biodiversity_wtp(gmst, pop, income, b: BiodiversityParams = BiodiversityParams()) -> np.ndarray:
    income = np.asarray(income, dtype=float)
    if np.any(income <= 0):
        raise ValueError("per-capita income must be > 0")
    per_capita = b.wtp_per_capita * (income / b.base_income) ** b.elasticity
    return per_capita * species_loss(gmst, b) * np.asarray(pop, dtype=float)


NONMARKET_SOURCES = ("mortality", "wildfire", "biodiversity")


def check_sources(names) -> None:
    bad = [n for n in names if n not in NONMARKET_SOURCES]
    if bad:
        raise ConfigError(f"unknown nonmarket source(s) {bad}; expected {NONMARKET_SOURCES}")
