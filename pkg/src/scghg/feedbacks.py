"""Amazon dieback and permafrost carbon feedbacks.

The step functions here are the readable reference; the fused climate kernel
inlines the same arithmetic. Both paths are compared in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .climate import FeedbackArrays
from .errors import ConfigError
from .kernels.climate import C_TO_CH4_MT, C_TO_CO2
from .rng import Distribution, trial_rng

_CLOSE = 1e-12


@dataclass(frozen=True)
class HazardParams:
    """Annual trigger probability = clamp(slope * (gmst - threshold), 0, 1)."""

    slope: float = 0.1
    threshold: float = 1.0

    def __post_init__(self):
        if self.slope < 0:
            raise ConfigError("hazard slope must be >= 0")

    def probability(self, gmst: float) -> float:
        return min(max(self.slope * max(0.0, gmst - self.threshold), 0.0), 1.0)


@dataclass(frozen=True)
class AmazonState:
    u: float
    duration: float
    budget: float = 183.0
    hazard: HazardParams = HazardParams()
    triggered: bool = False
    trigger_year: int | None = None
    released: float = 0.0


def amazon_step(s: AmazonState, gmst: float, u: float | None = None, year: int | None = None):
    """Advance one year. Returns (new state, GtCO2 released this year)."""
    u = s.u if u is None else u
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    if not s.triggered and u < s.hazard.probability(gmst):
        s = replace(s, triggered=True, trigger_year=year)
    if not s.triggered or s.released >= s.budget:
        return s, 0.0
    rate = s.budget / s.duration
    if s.released + rate >= s.budget * (1.0 - _CLOSE):
        # final year: release exactly what is left
        return replace(s, released=s.budget), s.budget - s.released
    return replace(s, released=s.released + rate), rate


@dataclass(frozen=True)
class PermafrostParams:
    frozen0: float           # GtC initially frozen
    thaw_rate: float         # fraction of frozen stock thawing per year per degC
    decomp_rate: float       # fraction of the active pool decomposing per year
    ch4_frac: float          # share of decomposed carbon released as CH4
    passive_frac: float      # share of thawed carbon that never decomposes

    def __post_init__(self):
        if min(self.frozen0, self.thaw_rate, self.decomp_rate, self.ch4_frac, self.passive_frac) < 0:
            raise ConfigError("permafrost parameters must be >= 0")
        if max(self.ch4_frac, self.passive_frac, self.decomp_rate) > 1:
            raise ConfigError("permafrost fractions and decomposition rate must be <= 1")


@dataclass(frozen=True)
class PermafrostState:
    params: PermafrostParams
    frozen: float
    active: float = 0.0
    passive: float = 0.0
    emitted_c: float = 0.0

    @classmethod
    def initial(cls, params: PermafrostParams) -> "PermafrostState":
        return cls(params, params.frozen0)


def permafrost_step(s: PermafrostState, gmst: float):
    """Advance one year. Returns (new state, GtCO2, MtCH4)."""
    p = s.params
    thaw = min(p.thaw_rate * max(0.0, gmst) * s.frozen, s.frozen)
    frozen = s.frozen - thaw
    passive = s.passive + p.passive_frac * thaw
    active = s.active + (1.0 - p.passive_frac) * thaw
    dec = min(p.decomp_rate * active, active)
    active = active - dec
    co2 = dec * (1.0 - p.ch4_frac) * C_TO_CO2
    ch4 = dec * p.ch4_frac * C_TO_CH4_MT
    return PermafrostState(p, frozen, active, passive, s.emitted_c + dec), co2, ch4


@dataclass(frozen=True)
class FeedbackConfig:
    """Provisional defaults: the trigger and thaw parameters are placeholders
    for the cited feedback models and are meant to be overridden."""

    amazon: bool = True
    permafrost: bool = True
    start_year: int = 2011
    hazard: HazardParams = HazardParams()
    amazon_budget: float = 183.0
    duration: Distribution = Distribution("triangular", (10.0, 50.0, 250.0))
    frozen0: Distribution = Distribution("truncnormal", (1035.0, 150.0))
    thaw_rate: Distribution = Distribution("truncnormal", (3.0e-4, 1.0e-4))
    decomp_rate: Distribution = Distribution("truncnormal", (0.014, 0.004))
    ch4_frac: Distribution = Distribution("truncnormal", (0.023, 0.006))
    passive_frac: Distribution = Distribution("truncnormal", (0.4, 0.1))

    @classmethod
    def from_toggle(cls, toggle: str, **kw) -> "FeedbackConfig":
        table = {"on": (True, True), "off": (False, False),
                 "amazon": (True, False), "permafrost": (False, True)}
        if toggle not in table:
            raise ConfigError(f"feedbacks must be one of {sorted(table)}, got {toggle!r}")
        a, p = table[toggle]
        return cls(amazon=a, permafrost=p, **kw)

    def problems(self) -> list[str]:
        p = []
        if self.amazon_budget < 0:
            p.append("feedbacks.amazon_budget must be >= 0")
        lo, hi = (self.duration.params[0], self.duration.params[-1]) if self.duration.family != "fixed" \
            else (self.duration.params[0],) * 2
        if lo < 1 or self.duration.family not in ("triangular", "uniform", "fixed"):
            p.append("feedbacks.duration must be a bounded distribution with minimum >= 1 year")
        for name in ("frozen0", "thaw_rate", "decomp_rate", "ch4_frac", "passive_frac"):
            if getattr(self, name).family not in ("truncnormal", "fixed"):
                p.append(f"feedbacks.{name} must be truncnormal or fixed")
        return p


def _clip01(x: float) -> float:
    return min(x, 1.0)


def sample_feedback_states(seed: int, trial_id: int, cfg: FeedbackConfig | None = None):
    """Per-trial (AmazonState, PermafrostState), fixed by (seed, trial_id)."""
    cfg = cfg or FeedbackConfig()
    rng = trial_rng(seed, trial_id, "amazon")
    u = float(rng.uniform())
    duration = cfg.duration.sample(rng)
    amazon = AmazonState(u, duration, cfg.amazon_budget, cfg.hazard)
    rng = trial_rng(seed, trial_id, "permafrost")
    params = PermafrostParams(
        cfg.frozen0.sample(rng),
        cfg.thaw_rate.sample(rng),
        _clip01(cfg.decomp_rate.sample(rng)),
        _clip01(cfg.ch4_frac.sample(rng)),
        _clip01(cfg.passive_frac.sample(rng)),
    )
    return amazon, PermafrostState.initial(params)


def feedback_arrays(seed: int, trial_ids, cfg: FeedbackConfig | None = None) -> FeedbackArrays:
    """Kernel-layout feedback inputs for a batch of trials."""
    cfg = cfg or FeedbackConfig()
    trial_ids = np.asarray(trial_ids)
    n = trial_ids.size
    if not (cfg.amazon or cfg.permafrost):
        return FeedbackArrays.off(n)
    cols = {k: np.zeros(n) for k in ("u", "dur", "f0", "thaw", "dec", "ch4", "pas")}
    for k, tid in enumerate(trial_ids):
        a, p = sample_feedback_states(seed, int(tid), cfg)
        cols["u"][k], cols["dur"][k] = a.u, a.duration
        pp = p.params
        cols["f0"][k], cols["thaw"][k], cols["dec"][k] = pp.frozen0, pp.thaw_rate, pp.decomp_rate
        cols["ch4"][k], cols["pas"][k] = pp.ch4_frac, pp.passive_frac
    return FeedbackArrays(
        np.full(n, cfg.amazon), cols["u"], np.full(n, cfg.hazard.slope), np.full(n, cfg.hazard.threshold),
        cols["dur"], np.full(n, cfg.amazon_budget),
        np.full(n, cfg.permafrost), cols["f0"], cols["thaw"], cols["dec"], cols["ch4"], cols["pas"],
    )


@dataclass
class FeedbackHook:
    """Per-trial feedback state machine usable as a `run_emulator` hook."""

    amazon: AmazonState | None
    permafrost: PermafrostState | None
    start_year: int = 2011
    log: list = field(default_factory=list)

    def __call__(self, year: int, gmst: float):
        co2 = ch4 = 0.0
        if year >= self.start_year:
            if self.amazon is not None:
                self.amazon, e = amazon_step(self.amazon, gmst, year=year)
                co2 += e
            if self.permafrost is not None:
                self.permafrost, e_co2, e_ch4 = permafrost_step(self.permafrost, gmst)
                co2 += e_co2
                ch4 += e_ch4
        self.log.append((year, co2, ch4))
        return co2, ch4


def make_hook(seed: int, trial_id: int, cfg: FeedbackConfig | None = None) -> FeedbackHook:
    cfg = cfg or FeedbackConfig()
    a, p = sample_feedback_states(seed, trial_id, cfg)
    return FeedbackHook(a if cfg.amazon else None, p if cfg.permafrost else None, cfg.start_year)
