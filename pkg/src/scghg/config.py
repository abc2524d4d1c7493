"""Run configuration: dataclasses, TOML parsing and round-trip serialization.

A config file has one table per module; every key is optional and falls back
to the defaults below. Unknown keys are errors, and parsing reports every
problem at once rather than stopping at the first.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import _toml
from .climate import GASES, ClimateConfig, ClimatePriors
from .damages.macro import IRF_ONLY_STUDIES, STUDY_FAMILY
from .damages.nonmarket import (NONMARKET_SOURCES, BiodiversityParams, MortalityResponse, VslParams,
                                WildfireParams)
from .discounting import TWO_GOOD_MODES, RamseyParams
from .errors import ConfigError
from .feedbacks import FeedbackConfig, HazardParams
from .rng import Distribution
from .scenario import SynthTargets

DEFAULT_PULSE = {"co2": 1.0, "ch4": 10.0, "n2o": 1.0}       # Gt, Mt, Mt
TONS_PER_UNIT = {"co2": 1e9, "ch4": 1e6, "n2o": 1e6}
MODES = ("independent", "integrated")


@dataclass(frozen=True)
class ScenarioConfig:
    path: Optional[str] = None          # CSV ensemble; synthetic when unset
    targets: SynthTargets = SynthTargets()


@dataclass(frozen=True)
class ParamConfig:
    path: Optional[str] = None          # CSV parameter sets; sampled when unset
    n_sets: int = 2237
    seed: int = 2237
    priors: ClimatePriors = ClimatePriors()


@dataclass(frozen=True)
class PatternConfig:
    path: Optional[str] = None          # GCM table CSV; bundled table when unset
    us_baseline: float = 13.62
    window: tuple = (1980, 2010)
    regressor: str = "baseline_window"
    ensemble_means: tuple = (2.00, 3.78)


@dataclass(frozen=True)
class MacroConfig:
    payload: Optional[str] = None       # study payload TOML overriding the bundled one
    t_base: Optional[float] = None


@dataclass(frozen=True)
class NonmarketConfig:
    vsl: VslParams = VslParams()
    mortality: MortalityResponse = MortalityResponse()
    wildfire: WildfireParams = WildfireParams()
    biodiversity: BiodiversityParams = BiodiversityParams()


@dataclass(frozen=True)
class DiscountConfig:
    rho: float = 0.0041
    eta: float = 1.02
    alpha: float = 0.0                  # nonmarket weight, B10 only
    two_good: str = "B12"               # rule used in integrated mode
    calibrate: bool = False
    target_near: float = 0.02
    far_horizon: int = 200
    far_target: float = 0.016

    def params(self) -> RamseyParams:
        return RamseyParams(self.rho, self.eta, self.alpha)


@dataclass(frozen=True)
class RunConfig:
    gas: str = "co2"
    pulse_year: int = 2030
    pulse_size: Optional[float] = None  # gas units; per-gas default when unset
    n_trials: int = 1000
    seed: int = 42
    sources: tuple = ("macro:Burke2015",)
    mode: str = "independent"
    vsl_income: Optional[str] = None    # exogenous | net_of_macro; mode default when unset
    discount_rule: Optional[str] = None  # B10 | B12 | B13; mode default when unset
    quantiles: tuple = (0.05, 0.5, 0.95)
    backend: str = "auto"
    batch_size: int = 1000
    scenario: ScenarioConfig = ScenarioConfig()
    params: ParamConfig = ParamConfig()
    climate: ClimateConfig = ClimateConfig()
    patterns: PatternConfig = PatternConfig()
    feedbacks: FeedbackConfig = FeedbackConfig()
    macro: MacroConfig = MacroConfig()
    nonmarket: NonmarketConfig = NonmarketConfig()
    discounting: DiscountConfig = DiscountConfig()

    # ---- derived views
    @property
    def pulse_amount(self) -> float:
        return DEFAULT_PULSE[self.gas] if self.pulse_size is None else float(self.pulse_size)

    @property
    def pulse_tons(self) -> float:
        return self.pulse_amount * TONS_PER_UNIT[self.gas]

    @property
    def macro_study(self) -> Optional[str]:
        for s in self.sources:
            if s.startswith("macro:"):
                return s.split(":", 1)[1]
        return None

    @property
    def nonmarket_sources(self) -> tuple:
        return tuple(s for s in self.sources if not s.startswith("macro:"))

    @property
    def effective_vsl_income(self) -> str:
        if self.vsl_income is not None:
            return self.vsl_income
        return "net_of_macro" if self.mode == "integrated" else "exogenous"

    @property
    def effective_discount_rule(self) -> str:
        if self.discount_rule is not None:
            return self.discount_rule
        return self.discounting.two_good if self.mode == "integrated" else "B13"

    def problems(self, require_sources: bool = False) -> list[str]:
        p = []
        if self.gas not in GASES:
            p.append(f"run.gas must be one of {GASES}, got {self.gas!r}")
        if self.pulse_size is not None and not self.pulse_size > 0:
            p.append("run.pulse_size must be > 0")
        if self.n_trials < 1:
            p.append("run.n_trials must be >= 1")
        if self.batch_size < 1:
            p.append("run.batch_size must be >= 1")
        if self.mode not in MODES:
            p.append(f"run.mode must be one of {MODES}, got {self.mode!r}")
        if self.vsl_income not in (None, "exogenous", "net_of_macro"):
            p.append("run.vsl_income must be 'exogenous' or 'net_of_macro'")
        rule = self.effective_discount_rule
        if rule not in TWO_GOOD_MODES:
            p.append(f"discount rule must be one of {TWO_GOOD_MODES}, got {rule!r}")
        elif rule == "B12" and self.discounting.eta == 1.0 and self.mode == "integrated":
            p.append("discounting: B12 needs alpha = eta/(eta-1), undefined at eta = 1; use B13")
        if self.backend not in ("auto", "numba", "numpy"):
            p.append("run.backend must be auto, numba or numpy")
        if require_sources and not self.sources:
            p.append("run.sources must enable at least one damage source")
        macro = [s for s in self.sources if s.startswith("macro:")]
        if len(macro) > 1:
            p.append("run.sources may include at most one macro study per run")
        for s in macro:
            study = s.split(":", 1)[1]
            if study in IRF_ONLY_STUDIES:
                p.append(f"{study} is available for impulse responses only")
            elif study not in STUDY_FAMILY and self.macro.payload is None:
                p.append(f"unknown macro study {study!r}; known {sorted(STUDY_FAMILY)}")
        for s in self.nonmarket_sources:
            if s not in NONMARKET_SOURCES:
                p.append(f"unknown damage source {s!r}; expected macro:<study> or one of {NONMARKET_SOURCES}")
        if len(set(self.sources)) != len(self.sources):
            p.append("run.sources has duplicates")
        for q in self.quantiles:
            if not 0.0 <= q <= 1.0:
                p.append(f"quantile {q} outside [0, 1]")
        ys, ye = self.scenario.targets.start_year, self.scenario.targets.end_year
        if self.scenario.path is None and not ys <= self.pulse_year <= ye:
            p.append(f"run.pulse_year {self.pulse_year} is outside the grid {ys}..{ye}")
        if self.nonmarket.wildfire.cap_year < ys and "wildfire" in self.sources:
            p.append("nonmarket.wildfire.cap_year is before the scenario grid")
        if self.patterns.regressor not in ("baseline_window", "preindustrial"):
            p.append("patterns.regressor must be 'baseline_window' or 'preindustrial'")
        for sub in (self.scenario.targets, self.climate, self.feedbacks, self.nonmarket.vsl,
                    self.nonmarket.mortality, self.nonmarket.wildfire, self.nonmarket.biodiversity):
            p += sub.problems()
        try:
            self.discounting.params()
        except ConfigError as exc:
            p += [f"discounting: {m}" for m in exc.problems]
        return p

    def validated(self, require_sources: bool = False) -> "RunConfig":
        problems = self.problems(require_sources)
        if problems:
            raise ConfigError(problems)
        return self


# ---------------------------------------------------------------- generic (de)serialization


def _convert(default, value, where, problems):
    """Coerce `value` to the type of `default`; nested dataclasses recurse."""
    if dataclasses.is_dataclass(default) and not isinstance(default, Distribution):
        if not isinstance(value, dict):
            problems.append(f"{where}: expected a table")
            return default
        return _build(type(default), value, where, problems, default)
    if isinstance(default, Distribution):
        try:
            return Distribution.from_obj(value, where)
        except ConfigError as exc:
            problems.extend(exc.problems)
            return default
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append(f"{where}: expected true/false, got {value!r}")
            return default
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}: expected an integer, got {value!r}")
            return default
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}: expected a number, got {value!r}")
            return default
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            problems.append(f"{where}: expected a string, got {value!r}")
            return default
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            problems.append(f"{where}: expected an array, got {value!r}")
            return default
        return _freeze(value)
    return value


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    return float(value) if isinstance(value, float) else value


# fields typed Optional[...] whose default is None
_OPTIONAL_KIND = {"path": str, "payload": str, "pulse_size": float, "t_base": float,
                  "vsl_income": str, "discount_rule": str}


def _build(cls, table: dict, where: str, problems: list, base=None):
    base = base if base is not None else cls()
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    for key in unknown:
        problems.append(f"{where}: unknown key {key!r}")
    changes = {}
    for key, value in table.items():
        if key not in names:
            continue
        default = getattr(base, key)
        sub = f"{where}.{key}"
        if default is None:
            kind = _OPTIONAL_KIND.get(key, str)
            if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
                changes[key] = float(value)
            elif kind is str and isinstance(value, str):
                changes[key] = value
            else:
                problems.append(f"{sub}: expected {kind.__name__}, got {value!r}")
        else:
            changes[key] = _convert(default, value, sub, problems)
    try:
        return dataclasses.replace(base, **changes)
    except ConfigError as exc:
        problems.extend(f"{where}: {m}" for m in exc.problems)
        return base
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return base


_SECTIONS = {"run", "scenario", "params", "climate", "patterns", "feedbacks", "macro",
             "nonmarket", "discounting"}


def parse_mapping(doc: dict, where: str = "config", require_sources: bool = True) -> RunConfig:
    problems: list[str] = []
    for key in sorted(set(doc) - _SECTIONS):
        problems.append(f"{where}: unknown section or key {key!r}")
    run_table = dict(doc.get("run", {}))
    if not isinstance(doc.get("run", {}), dict):
        problems.append(f"{where}.run: expected a table")
        run_table = {}
    nested = {k: doc[k] for k in _SECTIONS - {"run"} if k in doc}
    for k in ("scenario", "params", "climate", "patterns", "feedbacks", "macro", "nonmarket", "discounting"):
        if k in run_table:
            problems.append(f"{where}.run: {k!r} belongs in its own [{k}] section")
            run_table.pop(k)
    cfg = _build(RunConfig, {**run_table, **nested}, where, problems)
    if not problems:
        problems += cfg.problems(require_sources)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path, require_sources: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return parse_mapping(doc, str(path), require_sources)


def _plain(value):
    if isinstance(value, Distribution):
        return value.to_dict()
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)
                if getattr(value, f.name) is not None}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return value
    return value


def to_mapping(cfg: RunConfig) -> dict:
    """Config snapshot in the same layout `parse_mapping` reads."""
    d = _plain(cfg)
    out = {"run": {k: v for k, v in d.items() if not isinstance(v, dict)}}
    out.update({k: v for k, v in d.items() if isinstance(v, dict)})
    return out


def replace_run(cfg: RunConfig, **changes) -> RunConfig:
    """Apply command-line overrides, keeping nested defaults."""
    return dataclasses.replace(cfg, **{k: v for k, v in changes.items() if v is not None})
