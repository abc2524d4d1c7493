"""Pulse experiment orchestration.

Each trial runs a baseline and a pulsed emissions path through the same
draws (scenario row, climate parameter set, feedback states, wildfire slope),
evaluates the enabled damage sources on both, and discounts the difference to
the pulse year with the baseline run's stochastic discount factors.

Trials are processed in vectorized batches, but every computation is
row-local, so a trial's result depends only on (config, seed, trial id).
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import climate as C
from . import patterns as P
from .config import RunConfig
from .damages import macro as M
from .damages import nonmarket as NM
from .discounting import GrowthDecomposition, RamseyParams, calibrate, discount_factors, two_good_rate
from .errors import ConfigError, NumericalError, TrialError
from .feedbacks import feedback_arrays
from .rng import trial_rng
from .scenario import ScenarioEnsemble, load_ensemble, synth_ensemble


# ---------------------------------------------------------------- shared inputs


@dataclass
class SharedInputs:
    """Everything trials read but never modify."""

    ensemble: ScenarioEnsemble
    params: C.ParamTable
    pairing: P.PairingTable
    gcms: dict
    macro: Optional[M.MacroSpec]
    discount: RamseyParams
    checksums: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    calibration: Optional[dict] = None


def _sha(arrs) -> str:
    h = hashlib.sha256()
    for a in arrs:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def _file_sha(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_macro_spec(cfg: RunConfig) -> Optional[M.MacroSpec]:
    study = cfg.macro_study
    if study is None:
        return None
    spec = M.load_spec(cfg.macro.payload if cfg.macro.payload else study)
    if spec.study != study:
        raise ConfigError(f"macro payload is for {spec.study}, but sources name {study}")
    if cfg.macro.t_base is not None:
        spec = M.MacroSpec(spec.study, spec.family, spec.coefficients, cfg.macro.t_base, spec.irf_only)
    return spec


def bind_macro(cfg: RunConfig, sh: SharedInputs) -> SharedInputs:
    """Shared inputs whose macro spec matches the study `cfg` names."""
    have = sh.macro.study if sh.macro is not None else None
    if have == cfg.macro_study:
        return sh
    return dataclasses.replace(sh, macro=load_macro_spec(cfg))


def prepare(cfg: RunConfig) -> SharedInputs:
    cfg.validated()
    timings = {}
    t0 = time.perf_counter()
    if cfg.scenario.path:
        ens = load_ensemble(cfg.scenario.path)
        if ens.n_trials < cfg.n_trials:
            raise ConfigError(f"scenario file has {ens.n_trials} trials, run needs {cfg.n_trials}")
        ens = ens.head(cfg.n_trials)
    else:
        ens = synth_ensemble(cfg.n_trials, cfg.seed, cfg.scenario.targets)
    if cfg.pulse_year not in set(ens.years.tolist()):
        raise ConfigError(f"pulse year {cfg.pulse_year} is not on the scenario grid")
    timings["scenario"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.params.path:
        params = C.load_params(cfg.params.path)
    else:
        params = C.sample_param_ensemble(cfg.params.n_sets, cfg.params.seed, cfg.params.priors)
    gcm_list = P.rank_gcms(P.load_gcms(cfg.patterns.path), cfg.patterns.ensemble_means)
    warmth = C.emergent_warmth(params, cfg.climate, backend=cfg.backend)
    pairing = P.build_pairing(warmth, gcm_list, params.ids)
    timings["climate_setup"] = time.perf_counter() - t0

    checksums = {
        "scenario": ens.checksum,
        "params": _sha([params.ids, params.f2x, params.tf, params.cap1, params.cap2, params.ox,
                        params.a, params.tau, params.ch4_eff, params.n2o_eff, params.ch4_tau, params.n2o_tau]),
        "gcms": _sha([np.array([g.tcr, g.ecs, g.slope, g.intercept]) for g in gcm_list]),
    }
    for key, path in (("scenario_file", cfg.scenario.path), ("params_file", cfg.params.path),
                      ("gcms_file", cfg.patterns.path), ("macro_payload", cfg.macro.payload)):
        if path:
            checksums[key] = _file_sha(path)

    discount = cfg.discounting.params()
    calib = None
    if cfg.discounting.calibrate:
        growth = np.diff(np.log(ens.income), axis=1)
        res = calibrate(growth, cfg.discounting.target_near, cfg.discounting.far_target,
                        cfg.discounting.far_horizon, eta_default=cfg.discounting.eta)
        discount = RamseyParams(res.params.rho, res.params.eta, cfg.discounting.alpha)
        calib = {"rho": res.params.rho, "eta": res.params.eta,
                 "near_residual": res.near_residual, "far_residual": res.far_residual}
    if cfg.mode == "integrated" and cfg.effective_discount_rule == "B12" and discount.eta == 1.0:
        raise ConfigError("B12 needs eta != 1; use B13")
    return SharedInputs(ens, params, pairing, {g.name: g for g in gcm_list}, load_macro_spec(cfg),
                        discount, checksums, timings, calib)


# ---------------------------------------------------------------- batch pipeline


@dataclass
class BatchOutput:
    """Per-trial results for a batch; `components` are USD per ton."""

    trial_ids: np.ndarray
    param_ids: np.ndarray
    gcm: list
    components: dict
    pv_base: np.ndarray
    pv_pulse: np.ndarray
    detail: Optional[dict] = None


def param_index(seed: int, trial_ids, n_sets: int) -> np.ndarray:
    return np.array([trial_rng(seed, int(t), "climate").integers(n_sets) for t in trial_ids], dtype=np.int64)


def _annual_damages(cfg: RunConfig, sh: SharedInputs, years, gmst, us_ext, start, pop, gdp, slopes):
    """Damage paths on the scenario grid for stacked (base; pulse) rows."""
    out = {}
    gap = np.zeros_like(gdp)
    if sh.macro is not None:
        gap = M.log_gap(sh.macro, us_ext, start, gdp, cfg.backend)
        if not np.all(np.isfinite(gap)):
            bad = np.argwhere(~np.isfinite(gap))[0]
            err = NumericalError(f"non-finite macro damages in row {bad[0]}")
            err.row = int(bad[0])
            raise err
        out[f"macro:{sh.macro.study}"] = -np.expm1(gap) * gdp
    income = gdp / pop
    if cfg.effective_vsl_income == "net_of_macro":
        income = income * np.exp(gap)
    us = us_ext[:, start:]
    nm = cfg.nonmarket
    for src in cfg.nonmarket_sources:
        if src == "mortality":
            out[src] = NM.mortality_damages(us, pop, income, nm.mortality, nm.vsl)
        elif src == "wildfire":
            out[src] = NM.wildfire_damages(years, gmst, pop, income, slopes, nm.wildfire, nm.vsl)
        elif src == "biodiversity":
            out[src] = NM.biodiversity_wtp(gmst, pop, income, nm.biodiversity)
    return out, gap


def _discount(cfg: RunConfig, sh: SharedInputs, gdp, pop, gap, nonmarket_usd, k_pulse):
    """Baseline-run discount factors from the pulse year onward, (n, T - k_pulse)."""
    income = gdp / pop
    g0 = np.diff(np.log(income), axis=1)
    dgC = -np.diff(gap, axis=1)
    frac = nonmarket_usd / gdp
    if np.any(frac >= 1.0):
        raise NumericalError("nonmarket damages reached total GDP; discount growth undefined")
    dgE = -np.diff(np.log1p(-frac), axis=1)
    rates = two_good_rate(GrowthDecomposition(g0, dgC, dgE), sh.discount, cfg.effective_discount_rule)
    return discount_factors(rates[:, k_pulse:])     # rates r_{p+1} .. r_T


def run_batch(trial_ids, cfg: RunConfig, sh: SharedInputs, keep_detail: bool = False) -> BatchOutput:
    trial_ids = np.asarray(trial_ids, dtype=np.int64)
    n = trial_ids.size
    sh = bind_macro(cfg, sh)
    ens = sh.ensemble
    rows = trial_ids  # scenario row i belongs to trial i
    years = ens.years
    k_pulse = int(np.flatnonzero(years == cfg.pulse_year)[0])

    pidx = param_index(cfg.seed, trial_ids, len(sh.params))
    ptab = sh.params.take(pidx)
    param_ids = ptab.ids.copy()
    gcm_names = [sh.pairing.gcm_for(i) for i in param_ids]
    slope = np.array([sh.gcms[g].slope for g in gcm_names])
    icpt = np.array([sh.gcms[g].intercept for g in gcm_names])

    em = C.Emissions(years, ens.co2[rows], ens.ch4[rows], ens.n2o[rows])
    pulsed = C.apply_pulse(em, C.PulseSpec(cfg.gas, cfg.pulse_year, cfg.pulse_amount))
    stacked = C.Emissions(years, *(np.concatenate([getattr(em, g), getattr(pulsed, g)]) for g in C.GASES))
    full = C.with_history(stacked, cfg.climate)
    fb = feedback_arrays(cfg.seed, trial_ids, cfg.feedbacks).tile(2)
    both = C.ParamTable(*(np.concatenate([getattr(ptab, f), getattr(ptab, f)])
                          for f in ptab.__dataclass_fields__))
    try:
        res = C.simulate(full, both, cfg.climate, fb, cfg.feedbacks.start_year, cfg.backend)
    except NumericalError as exc:
        raise TrialError(int(trial_ids[getattr(exc, "row", 0) % n]), exc) from exc

    start = int(np.flatnonzero(res.years == years[0])[0])
    us_ext = P.downscale_batch(res.years, res.gmst, np.tile(slope, 2), np.tile(icpt, 2),
                               cfg.patterns.us_baseline, cfg.patterns.window, cfg.patterns.regressor)
    gmst = res.gmst[:, start:]
    pop = np.tile(ens.pop[rows], (2, 1))
    gdp = np.tile(ens.gdp[rows], (2, 1))
    slopes = np.zeros(n)
    if "wildfire" in cfg.sources:
        slopes = np.array([NM.sample_wildfire_slope(cfg.seed, int(t), cfg.nonmarket.wildfire)
                           for t in trial_ids])
    try:
        dmg, gap = _annual_damages(cfg, sh, years, gmst, us_ext, start, pop, gdp, np.tile(slopes, 2))
    except NumericalError as exc:
        raise TrialError(int(trial_ids[getattr(exc, "row", 0) % n]), exc) from exc

    nm_names = [s for s in dmg if not s.startswith("macro:")]
    nm_base = sum((dmg[s][:n] for s in nm_names), np.zeros((n, years.size)))
    df = _discount(cfg, sh, gdp[:n], pop[:n], gap[:n], nm_base, k_pulse)

    tons = cfg.pulse_tons
    per_source = {}
    pv_base = np.zeros(n)
    pv_pulse = np.zeros(n)
    for name, d in dmg.items():
        base, pulse = d[:n, k_pulse:], d[n:, k_pulse:]
        per_source[name] = np.sum(df * (pulse - base), axis=1) / tons
        pv_base += np.sum(df * base, axis=1)
        pv_pulse += np.sum(df * pulse, axis=1)

    market = sum((v for k, v in per_source.items() if k.startswith("macro:")), np.zeros(n))
    nonmarket = sum((per_source[k] for k in nm_names), np.zeros(n))
    if cfg.mode == "integrated":
        total = (pv_pulse - pv_base) / tons
        market = total - nonmarket   # interaction effects are attributed to the market side
    else:
        total = market + nonmarket
    components = {**per_source, "market": market, "nonmarket": nonmarket, "total": total}
    bad = ~(np.isfinite(pv_base) & np.isfinite(pv_pulse) & np.isfinite(total))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise TrialError(int(trial_ids[k]), NumericalError("non-finite present value"))
    detail = None
    if keep_detail:
        detail = {"years": years, "gmst": gmst, "us_temp": us_ext[:, start:], "log_gap": gap,
                  "damages": dmg, "discount_factors": df}
    return BatchOutput(trial_ids, param_ids, gcm_names, components, pv_base, pv_pulse, detail)


def run_trial(trial_id: int, cfg: RunConfig, sh: SharedInputs):
    """(pv_base, pv_pulse, per-component SC) for one trial."""
    out = run_batch([trial_id], cfg, sh)
    return float(out.pv_base[0]), float(out.pv_pulse[0]), {k: float(v[0]) for k, v in out.components.items()}


# ---------------------------------------------------------------- estimates


@dataclass
class ScghgEstimate:
    config: RunConfig
    trial_ids: np.ndarray
    param_ids: np.ndarray
    gcm: list
    components: dict              # name -> per-trial USD per ton
    pv_base: np.ndarray
    pv_pulse: np.ndarray
    timings: dict = field(default_factory=dict)
    shared: Optional[SharedInputs] = None
    detail: Optional[dict] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.components["total"]))

    def component_mean(self, name: str) -> float:
        return float(np.mean(self.components[name]))

    def quantiles(self, name: str = "total", qs=None) -> dict:
        qs = self.config.quantiles if qs is None else qs
        return {q: float(np.quantile(self.components[name], q)) for q in qs}

    @property
    def label(self) -> str:
        return self.config.macro_study or "+".join(self.config.nonmarket_sources) or "none"


def scghg(cfg: RunConfig, shared: Optional[SharedInputs] = None, keep_detail: bool = False) -> ScghgEstimate:
    """Monte Carlo SC estimate in 2020USD per metric ton of the pulsed gas."""
    cfg = cfg.validated()
    t0 = time.perf_counter()
    sh = bind_macro(cfg, shared) if shared is not None else prepare(cfg)
    ids = np.arange(cfg.n_trials, dtype=np.int64)
    parts = []
    t1 = time.perf_counter()
    for lo in range(0, ids.size, cfg.batch_size):
        parts.append(run_batch(ids[lo:lo + cfg.batch_size], cfg, sh, keep_detail))
    timings = dict(sh.timings)
    timings["trials"] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0
    names = list(parts[0].components)
    comps = {k: np.concatenate([p.components[k] for p in parts]) for k in names}
    detail = None
    if keep_detail:
        detail = {"years": parts[0].detail["years"]}
        for key in ("gmst", "us_temp", "log_gap", "discount_factors"):
            detail[key] = np.concatenate([p.detail[key] for p in parts])
    return ScghgEstimate(cfg, ids, np.concatenate([p.param_ids for p in parts]),
                         [g for p in parts for g in p.gcm], comps,
                         np.concatenate([p.pv_base for p in parts]),
                         np.concatenate([p.pv_pulse for p in parts]), timings, sh, detail)


def table_rows(estimates, quantiles=None) -> tuple[list, list]:
    """Header and rows: one row per estimate with market, nonmarket and total."""
    estimates = list(estimates)
    qs = tuple(estimates[0].config.quantiles if quantiles is None else quantiles)
    header = ["source", "gas", "mode", "market", "nonmarket", "total"] + [f"total_q{q!r}" for q in qs]
    rows = []
    for est in estimates:
        m, nm = est.component_mean("market"), est.component_mean("nonmarket")
        tot = est.component_mean("total")
        qv = est.quantiles("total", qs)
        rows.append([est.label, est.config.gas, est.config.mode, m, nm, tot] + [qv[q] for q in qs])
    return header, rows


def baseline_climate(cfg: RunConfig, sh: SharedInputs, trial_ids=None):
    """Baseline (no pulse) temperatures: (years, gmst on grid, U.S. temps with history, start)."""
    ens = sh.ensemble
    ids = np.arange(cfg.n_trials) if trial_ids is None else np.asarray(trial_ids, dtype=np.int64)
    ptab = sh.params.take(param_index(cfg.seed, ids, len(sh.params)))
    gcm_names = [sh.pairing.gcm_for(i) for i in ptab.ids]
    em = C.with_history(C.Emissions(ens.years, ens.co2[ids], ens.ch4[ids], ens.n2o[ids]), cfg.climate)
    fb = feedback_arrays(cfg.seed, ids, cfg.feedbacks)
    res = C.simulate(em, ptab, cfg.climate, fb, cfg.feedbacks.start_year, cfg.backend)
    start = int(np.flatnonzero(res.years == ens.years[0])[0])
    us_ext = P.downscale_batch(res.years, res.gmst,
                               np.array([sh.gcms[g].slope for g in gcm_names]),
                               np.array([sh.gcms[g].intercept for g in gcm_names]),
                               cfg.patterns.us_baseline, cfg.patterns.window, cfg.patterns.regressor)
    return ens.years, res.gmst[:, start:], us_ext, start


def surface_points(cfg: RunConfig, sh: SharedInputs, spec: M.MacroSpec, year: int = 2100):
    """Per-trial (GMST anomaly, GDP loss fraction) in `year` on the baseline."""
    years, gmst, us_ext, start = baseline_climate(cfg, sh)
    k = int(np.flatnonzero(years == year)[0])
    gap = M.log_gap(spec, us_ext, start, sh.ensemble.gdp[:cfg.n_trials], cfg.backend)
    return gmst[:, k], -np.expm1(gap[:, k])
