"""Reduced-complexity climate emulator.

Four-pool linear carbon cycle, logarithmic CO2 forcing, linear CH4/N2O
forcing with one atmospheric lifetime per gas, and a two-box energy balance
stepped annually. Runs start from an equilibrated pre-industrial state at
`history_start` and are driven by a built-in historical emissions path up to
the scenario start year.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._jit import resolve_backend
from .errors import ConfigError, NumericalError, SchemaError, ValidationError
from .kernels.climate import climate_numba, climate_numpy
from .rng import Distribution

GASES = ("co2", "ch4", "n2o")
PARAM_COLUMNS = (
    "id", "f2x", "tf", "cap1", "cap2", "ox", "a1", "a2", "a3", "a4",
    "tau1", "tau2", "tau3", "tau4", "ch4_eff", "n2o_eff", "ch4_tau", "n2o_tau",
)


@dataclass(frozen=True)
class ClimateParamSet:
    id: int
    f2x: float
    tf: float            # climate feedback, W/m2/K
    cap1: float          # upper box heat capacity, W yr/m2/K
    cap2: float          # deep box heat capacity
    ox: float            # ocean heat exchange, W/m2/K
    a: tuple = (0.2173, 0.2240, 0.2824, 0.2763)
    tau: tuple = (math.inf, 394.4, 36.54, 4.304)
    ch4_eff: float = 0.00045
    n2o_eff: float = 0.0030
    ch4_tau: float = 9.3
    n2o_tau: float = 116.0

    def problems(self) -> list[str]:
        p = []
        if len(self.a) != 4 or len(self.tau) != 4:
            p.append("need exactly 4 carbon pool fractions and timescales")
            return p
        if any(x < 0 for x in self.a) or abs(sum(self.a) - 1.0) > 1e-12:
            p.append(f"pool fractions must be >= 0 and sum to 1, got {sum(self.a)!r}")
        if any(not x > 0 for x in self.tau):
            p.append("pool timescales must be > 0")
        for name in ("f2x", "tf", "cap1", "cap2", "ox", "ch4_tau", "n2o_tau"):
            if not getattr(self, name) > 0:
                p.append(f"{name} must be > 0")
        for name in ("ch4_eff", "n2o_eff"):
            if getattr(self, name) < 0:
                p.append(f"{name} must be >= 0")
        # explicit annual stepping needs every response timescale >= 1 year
        if self.tf > 0 and self.ox > 0 and self.cap1 / (self.tf + self.ox) < 1.0:
            p.append("cap1 / (tf + ox) < 1 year: annual stepping would be unstable")
        if self.ox > 0 and self.cap2 / self.ox < 1.0:
            p.append("cap2 / ox < 1 year: annual stepping would be unstable")
        if min(self.tau) < 1.0 or min(self.ch4_tau, self.n2o_tau) < 1.0:
            p.append("gas timescales below 1 year are not supported")
        return p

    def validated(self) -> "ClimateParamSet":
        problems = self.problems()
        if problems:
            raise ValidationError(f"param set {self.id}: " + "; ".join(problems))
        return self

    @property
    def ecs(self) -> float:
        return self.f2x / self.tf


@dataclass
class ParamTable:
    """Column-oriented parameter ensemble, the layout the kernels consume."""

    ids: np.ndarray
    f2x: np.ndarray
    tf: np.ndarray
    cap1: np.ndarray
    cap2: np.ndarray
    ox: np.ndarray
    a: np.ndarray       # (n, 4)
    tau: np.ndarray     # (n, 4)
    ch4_eff: np.ndarray
    n2o_eff: np.ndarray
    ch4_tau: np.ndarray
    n2o_tau: np.ndarray

    def __len__(self):
        return int(self.ids.size)

    @classmethod
    def from_sets(cls, sets) -> "ParamTable":
        sets = list(sets)
        col = lambda name: np.array([getattr(s, name) for s in sets], dtype=float)
        return cls(
            np.array([s.id for s in sets], dtype=np.int64),
            col("f2x"), col("tf"), col("cap1"), col("cap2"), col("ox"),
            np.array([s.a for s in sets], dtype=float).reshape(-1, 4),
            np.array([s.tau for s in sets], dtype=float).reshape(-1, 4),
            col("ch4_eff"), col("n2o_eff"), col("ch4_tau"), col("n2o_tau"),
        )

    def get(self, k: int) -> ClimateParamSet:
        return ClimateParamSet(
            int(self.ids[k]), float(self.f2x[k]), float(self.tf[k]), float(self.cap1[k]),
            float(self.cap2[k]), float(self.ox[k]), tuple(self.a[k].tolist()),
            tuple(self.tau[k].tolist()), float(self.ch4_eff[k]), float(self.n2o_eff[k]),
            float(self.ch4_tau[k]), float(self.n2o_tau[k]),
        )

    def take(self, idx) -> "ParamTable":
        idx = np.asarray(idx)
        return ParamTable(*(getattr(self, f.name)[idx] for f in fields(self)))

    def index_of(self) -> dict:
        return {int(v): k for k, v in enumerate(self.ids)}


def write_params(table: ParamTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PARAM_COLUMNS)
        for k in range(len(table)):
            p = table.get(k)
            w.writerow([p.id, *(repr(float(v)) for v in (
                p.f2x, p.tf, p.cap1, p.cap2, p.ox, *p.a, *p.tau,
                p.ch4_eff, p.n2o_eff, p.ch4_tau, p.n2o_tau))])


def load_params(path) -> ParamTable:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PARAM_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        sets = []
        for row in reader:
            try:
                v = {k: float(row[k]) for k in PARAM_COLUMNS}
            except ValueError as exc:
                raise SchemaError(f"{path}: {exc}") from None
            sets.append(ClimateParamSet(
                int(v["id"]), v["f2x"], v["tf"], v["cap1"], v["cap2"], v["ox"],
                tuple(v[f"a{k}"] for k in range(1, 5)), tuple(v[f"tau{k}"] for k in range(1, 5)),
                v["ch4_eff"], v["n2o_eff"], v["ch4_tau"], v["n2o_tau"],
            ).validated())
    if not sets:
        raise SchemaError(f"{path}: no parameter rows")
    ids = [s.id for s in sets]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate parameter set ids")
    return ParamTable.from_sets(sets)


@dataclass(frozen=True)
class ClimatePriors:
    """Sampling distributions for a synthetic parameter ensemble.

    ECS is sampled and the feedback parameter derived from it; the finite
    carbon-pool timescales share one multiplicative factor.
    """

    f2x: Distribution = Distribution("lognormal", (3.93, 0.10))
    ecs: Distribution = Distribution("lognormal", (3.0, 0.26))
    cap1: Distribution = Distribution("lognormal", (8.0, 0.15))
    cap2: Distribution = Distribution("lognormal", (50.0, 0.25))
    ox: Distribution = Distribution("lognormal", (0.75, 0.20))
    # the linear cycle has no uptake saturation; shorter finite timescales
    # bring historical concentrations close to observed levels
    tau_scale: Distribution = Distribution("lognormal", (0.6, 0.15))
    ch4_eff: Distribution = Distribution("lognormal", (0.00045, 0.10))
    n2o_eff: Distribution = Distribution("lognormal", (0.0030, 0.10))
    ch4_tau: Distribution = Distribution("lognormal", (9.3, 0.10))
    n2o_tau: Distribution = Distribution("lognormal", (116.0, 0.05))
    a: tuple = (0.2173, 0.2240, 0.2824, 0.2763)
    tau: tuple = (math.inf, 394.4, 36.54, 4.304)


def central_params(priors: ClimatePriors | None = None, id: int = 0) -> ClimateParamSet:
    """Parameter set at the prior medians."""
    pr = priors or ClimatePriors()
    med = lambda d: d.params[0] if d.family in ("lognormal", "fixed") else d.mean()
    f2x = med(pr.f2x)
    return ClimateParamSet(
        id, f2x, f2x / med(pr.ecs), med(pr.cap1), med(pr.cap2), med(pr.ox), pr.a,
        tuple(t * med(pr.tau_scale) for t in pr.tau),
        med(pr.ch4_eff), med(pr.n2o_eff), med(pr.ch4_tau), med(pr.n2o_tau),
    ).validated()


def sample_param_ensemble(n: int, seed: int, priors: ClimatePriors | None = None) -> ParamTable:
    """Draw n parameter sets; unstable draws are rejected and redrawn."""
    pr = priors or ClimatePriors()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x434C494D]))
    sets = []
    while len(sets) < n:
        f2x = pr.f2x.sample(rng)
        ecs = pr.ecs.sample(rng)
        scale = pr.tau_scale.sample(rng)
        cand = ClimateParamSet(
            len(sets), f2x, f2x / ecs, pr.cap1.sample(rng), pr.cap2.sample(rng), pr.ox.sample(rng),
            pr.a, tuple(t * scale for t in pr.tau), pr.ch4_eff.sample(rng), pr.n2o_eff.sample(rng),
            pr.ch4_tau.sample(rng), pr.n2o_tau.sample(rng),
        )
        if not cand.problems():
            sets.append(cand)
    return ParamTable.from_sets(sets)


# ---------------------------------------------------------------- run setup


@dataclass(frozen=True)
class ClimateConfig:
    history_start: int = 1850
    c0_ppm: float = 278.0
    gt_per_ppm: float = 7.79         # GtCO2 per ppm
    ch4_mt_per_ppb: float = 2.78
    n2o_mt_per_ppb: float = 7.55
    # anthropogenic emissions before the scenario grid, linear between anchors
    history_co2: tuple = ((1850, 2.7), (1900, 4.5), (1950, 10.0), (1970, 19.0), (1990, 27.0),
                          (2000, 30.0), (2010, 37.0), (2019, 40.0))
    history_ch4: tuple = ((1850, 30.0), (1900, 60.0), (1950, 140.0), (1970, 230.0),
                          (1990, 300.0), (2010, 340.0), (2019, 375.0))
    history_n2o: tuple = ((1850, 1.0), (1900, 2.0), (1950, 3.5), (1990, 8.0), (2019, 10.8))
    # aerosols, ozone, land use, halocarbons and natural forcing lumped together
    other_forcing: tuple = ((1850, 0.0), (1900, -0.13), (1950, -0.46), (1970, -0.78), (1990, -0.98),
                            (2010, -0.85), (2020, -0.72), (2050, -0.33), (2100, -0.13), (2300, -0.13))
    # reference path used to rank parameter sets by 2100 warmth
    reference_co2: tuple = ((2020, 40.0), (2040, 44.0), (2060, 40.0), (2080, 30.0), (2100, 18.0))
    reference_ch4: tuple = ((2020, 380.0), (2050, 390.0), (2100, 300.0))
    reference_n2o: tuple = ((2020, 11.0), (2100, 12.0))
    reference_end: int = 2100

    def problems(self) -> list[str]:
        p = []
        for name in ("c0_ppm", "gt_per_ppm", "ch4_mt_per_ppb", "n2o_mt_per_ppb"):
            if not getattr(self, name) > 0:
                p.append(f"climate.{name} must be > 0")
        for name in ("history_co2", "history_ch4", "history_n2o", "other_forcing",
                     "reference_co2", "reference_ch4", "reference_n2o"):
            yrs = [y for y, _ in getattr(self, name)]
            if not yrs or yrs != sorted(set(yrs)):
                p.append(f"climate.{name} needs strictly increasing anchor years")
        return p


def _interp(anchors, years) -> np.ndarray:
    return np.interp(years, [y for y, _ in anchors], [v for _, v in anchors])


@dataclass(frozen=True)
class PulseSpec:
    gas: str
    year: int
    size: float

    def __post_init__(self):
        if self.gas not in GASES:
            raise ConfigError(f"pulse gas must be one of {GASES}, got {self.gas!r}")
        if not self.size > 0:
            raise ConfigError(f"pulse size must be > 0, got {self.size}")


@dataclass
class Emissions:
    """Per-gas emission paths on a shared grid; arrays are (years,) or (trials, years)."""

    years: np.ndarray
    co2: np.ndarray
    ch4: np.ndarray
    n2o: np.ndarray

    def copy(self) -> "Emissions":
        return Emissions(self.years, self.co2.copy(), self.ch4.copy(), self.n2o.copy())


def apply_pulse(em: Emissions, pulse: PulseSpec) -> Emissions:
    hit = np.flatnonzero(np.asarray(em.years) == pulse.year)
    if hit.size == 0:
        raise IndexError(f"pulse year {pulse.year} is outside the grid {em.years[0]}..{em.years[-1]}")
    out = em.copy()
    getattr(out, pulse.gas)[..., hit[0]] += pulse.size
    return out


def with_history(em: Emissions, cfg: ClimateConfig) -> Emissions:
    """Prepend the built-in historical emissions so runs start pre-industrial."""
    start = int(em.years[0])
    if start <= cfg.history_start:
        return em
    hist_years = np.arange(cfg.history_start, start)
    shape = np.shape(em.co2)[:-1]

    def glue(gas, arr):
        h = _interp(getattr(cfg, f"history_{gas}"), hist_years)
        h = np.broadcast_to(h, shape + h.shape)
        return np.concatenate([h, np.asarray(arr, dtype=float)], axis=-1)

    return Emissions(np.arange(cfg.history_start, int(em.years[-1]) + 1),
                     glue("co2", em.co2), glue("ch4", em.ch4), glue("n2o", em.n2o))


def reference_emissions(cfg: ClimateConfig, start_year: int = 2020) -> Emissions:
    years = np.arange(start_year, cfg.reference_end + 1)
    return Emissions(years, *(_interp(getattr(cfg, f"reference_{g}"), years) for g in GASES))


@dataclass(frozen=True)
class GmstPath:
    years: np.ndarray
    anomaly: np.ndarray


# ---------------------------------------------------------------- feedback inputs


@dataclass
class FeedbackArrays:
    """Per-trial feedback parameters in kernel layout; all-off by default."""

    amz_on: np.ndarray
    amz_u: np.ndarray
    amz_slope: np.ndarray
    amz_thr: np.ndarray
    amz_dur: np.ndarray
    amz_budget: np.ndarray
    pf_on: np.ndarray
    pf_frozen0: np.ndarray
    pf_thaw: np.ndarray
    pf_decomp: np.ndarray
    pf_ch4: np.ndarray
    pf_passive: np.ndarray

    @classmethod
    def off(cls, n: int) -> "FeedbackArrays":
        z = np.zeros(n)
        f = np.zeros(n, dtype=np.bool_)
        return cls(f, z, z, z, np.ones(n), z, f.copy(), z, z, z, z, z)

    def tile(self, reps: int) -> "FeedbackArrays":
        return FeedbackArrays(*(np.tile(getattr(self, f.name), reps) for f in fields(self)))


@dataclass
class BatchResult:
    years: np.ndarray
    gmst: np.ndarray
    fb_co2: np.ndarray
    fb_ch4: np.ndarray


def simulate(em: Emissions, params: ParamTable, cfg: ClimateConfig | None = None,
             feedbacks: FeedbackArrays | None = None, fb_start_year: int = 2011,
             backend: str = "auto") -> BatchResult:
    """Run the fused kernel for a batch: row i of `em` with parameter row i.

    `em` must already include history (see `with_history`) when a
    pre-industrial start is wanted.
    """
    cfg = cfg or ClimateConfig()
    years = np.asarray(em.years)
    co2 = np.ascontiguousarray(np.atleast_2d(em.co2), dtype=float)
    ch4 = np.ascontiguousarray(np.atleast_2d(em.ch4), dtype=float)
    n2o = np.ascontiguousarray(np.atleast_2d(em.n2o), dtype=float)
    n = co2.shape[0]
    if len(params) != n:
        raise ValueError(f"{len(params)} parameter rows for {n} emission rows")
    fb = feedbacks or FeedbackArrays.off(n)
    other = np.ascontiguousarray(_interp(cfg.other_forcing, years))
    decay = np.exp(-1.0 / params.tau)
    gmst = np.empty_like(co2)
    fb_co2 = np.zeros_like(co2)
    fb_ch4 = np.zeros_like(co2)
    bad = np.empty(n, dtype=np.int64)
    fb_start = int(np.searchsorted(years, fb_start_year))
    kernel = climate_numba if resolve_backend(backend) == "numba" else climate_numpy
    kernel(co2, ch4, n2o, other,
           np.ascontiguousarray(params.a), np.ascontiguousarray(decay),
           params.f2x, params.tf, params.cap1, params.cap2, params.ox,
           params.ch4_eff, params.n2o_eff, np.exp(-1.0 / params.ch4_tau), np.exp(-1.0 / params.n2o_tau),
           float(cfg.c0_ppm), float(cfg.gt_per_ppm), float(cfg.ch4_mt_per_ppb), float(cfg.n2o_mt_per_ppb),
           fb_start,
           fb.amz_on, fb.amz_u, fb.amz_slope, fb.amz_thr, fb.amz_dur, fb.amz_budget,
           fb.pf_on, fb.pf_frozen0, fb.pf_thaw, fb.pf_decomp, fb.pf_ch4, fb.pf_passive,
           gmst, fb_co2, fb_ch4, bad)
    if np.any(bad >= 0):
        i = int(np.flatnonzero(bad >= 0)[0])
        err = NumericalError(f"non-finite climate state in row {i}, year {years[bad[i]]}")
        err.row = i
        raise err
    return BatchResult(years, gmst, fb_co2, fb_ch4)


def run_emulator(em: Emissions, p: ClimateParamSet, cfg: ClimateConfig | None = None,
                 feedback_hook: Optional[Callable[[int, float], tuple]] = None,
                 backend: str = "auto") -> GmstPath:
    """Single-trial run on the grid of `em` starting from the pre-industrial state.

    `feedback_hook(year, gmst)` returns extra (GtCO2, MtCH4) which enter the
    emissions of the following year. Without a hook the batched kernel runs.
    """
    cfg = cfg or ClimateConfig()
    p.validated()
    table = ParamTable.from_sets([p])
    if feedback_hook is None:
        res = simulate(em, table, cfg, backend=backend)
        return GmstPath(np.asarray(em.years), res.gmst[0])
    return GmstPath(np.asarray(em.years), _run_with_hook(em, p, cfg, feedback_hook))


def _run_with_hook(em: Emissions, p: ClimateParamSet, cfg: ClimateConfig, hook) -> np.ndarray:
    """Reference Python loop; same arithmetic order as the kernels."""
    years = np.asarray(em.years)
    co2, ch4, n2o = (np.asarray(x, dtype=float) for x in (em.co2, em.ch4, em.n2o))
    other = _interp(cfg.other_forcing, years)
    a = p.a
    decay = [math.exp(-1.0 / t) for t in p.tau]
    d_ch4, d_n2o = math.exp(-1.0 / p.ch4_tau), math.exp(-1.0 / p.n2o_tau)
    r = [0.0, 0.0, 0.0, 0.0]
    m_ch4 = m_n2o = t1 = t2 = q_co2 = q_ch4 = 0.0
    out = np.empty(years.size)
    for t in range(years.size):
        e_co2 = co2[t] + q_co2
        e_ch4 = ch4[t] + q_ch4
        for k in range(4):
            r[k] = r[k] * decay[k] + a[k] * e_co2
        conc = cfg.c0_ppm + (r[0] + r[1] + r[2] + r[3]) / cfg.gt_per_ppm
        m_ch4 = m_ch4 * d_ch4 + e_ch4 / cfg.ch4_mt_per_ppb
        m_n2o = m_n2o * d_n2o + n2o[t] / cfg.n2o_mt_per_ppb
        if conc <= 0:
            raise NumericalError(f"non-positive CO2 concentration in {years[t]}")
        forcing = (p.f2x / math.log(2.0) * math.log(conc / cfg.c0_ppm)
                   + p.ch4_eff * m_ch4 + p.n2o_eff * m_n2o + other[t])
        d1 = (forcing - p.tf * t1 - p.ox * (t1 - t2)) / p.cap1
        d2 = p.ox * (t1 - t2) / p.cap2
        t1, t2 = t1 + d1, t2 + d2
        if not math.isfinite(t1):
            raise NumericalError(f"non-finite GMST in {years[t]}")
        out[t] = t1
        q_co2, q_ch4 = hook(int(years[t]), t1)
    return out


def two_box_response(forcing, p: ClimateParamSet, t1: float = 0.0, t2: float = 0.0) -> np.ndarray:
    """Surface temperature under a prescribed forcing path (energy balance only)."""
    out = np.empty(len(forcing))
    for k, f in enumerate(forcing):
        d1 = (f - p.tf * t1 - p.ox * (t1 - t2)) / p.cap1
        d2 = p.ox * (t1 - t2) / p.cap2
        t1, t2 = t1 + d1, t2 + d2
        out[k] = t1
    return out


def carbon_pools(co2, p: ClimateParamSet) -> tuple[np.ndarray, np.ndarray]:
    """Pool stocks (years, 4) and cumulative decayed mass per pool, for audits."""
    co2 = np.asarray(co2, dtype=float)
    decay = np.exp(-1.0 / np.asarray(p.tau))
    a = np.asarray(p.a)
    r = np.zeros(4)
    lost = np.zeros(4)
    stocks = np.empty((co2.size, 4))
    decayed = np.empty((co2.size, 4))
    for t, e in enumerate(co2):
        lost = lost + r * (1.0 - decay)
        r = r * decay + a * e
        stocks[t] = r
        decayed[t] = lost
    return stocks, decayed


def emergent_warmth(params: ParamTable | ClimateParamSet, cfg: ClimateConfig | None = None,
                    reference: Emissions | None = None, backend: str = "auto") -> np.ndarray | float:
    """GMST in the reference path's final year (2100 by default), per parameter set."""
    cfg = cfg or ClimateConfig()
    single = isinstance(params, ClimateParamSet)
    table = ParamTable.from_sets([params]) if single else params
    ref = with_history(reference or reference_emissions(cfg), cfg)
    n = len(table)
    em = Emissions(ref.years, *(np.tile(getattr(ref, g), (n, 1)) for g in GASES))
    res = simulate(em, table, cfg, backend=backend)
    warm = res.gmst[:, -1]
    return float(warm[0]) if single else warm


def with_params(p: ClimateParamSet, **changes) -> ClimateParamSet:
    return replace(p, **changes).validated()
