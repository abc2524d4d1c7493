"""Socioeconomic and emissions ensembles: CSV ingestion and synthesis.

The synthesizer is a stand-in for externally produced probabilistic
projections. It reproduces a handful of ensemble-level summary statistics
(population peak, per-capita growth epochs) and nothing more.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, SchemaError, ValidationError
from .rng import trial_rng

START_YEAR = 2020
END_YEAR = 2300

COLUMNS = ("trial", "year", "pop", "gdp", "co2", "ch4", "n2o")
SERIES = ("pop", "gdp", "co2", "ch4", "n2o")


@dataclass(frozen=True)
class TrialScenario:
    """One joint draw. Arrays are read-only views into the ensemble."""

    trial_id: int
    years: np.ndarray
    population: np.ndarray
    gdp: np.ndarray
    emissions_co2: np.ndarray
    emissions_ch4: np.ndarray
    emissions_n2o: np.ndarray

    @property
    def income_per_capita(self) -> np.ndarray:
        return self.gdp / self.population


@dataclass
class ScenarioEnsemble:
    years: np.ndarray
    pop: np.ndarray
    gdp: np.ndarray
    co2: np.ndarray
    ch4: np.ndarray
    n2o: np.ndarray
    source: str = "synthetic"
    checksum: str = field(default="")

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=np.int64)
        for name in SERIES:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.years.size:
                raise ValidationError(f"{name} must be (trials, {self.years.size}), got {arr.shape}")
            arr.flags.writeable = False
            setattr(self, name, arr)
        _check_grid(self.years)
        _check_positive(self)
        if not self.checksum:
            self.checksum = self._digest()

    def _digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.years.tobytes())
        for name in SERIES:
            h.update(getattr(self, name).tobytes())
        return h.hexdigest()

    @property
    def n_trials(self) -> int:
        return self.pop.shape[0]

    @property
    def trial_ids(self) -> np.ndarray:
        return np.arange(self.n_trials)

    @property
    def income(self) -> np.ndarray:
        return self.gdp / self.pop

    def __len__(self):
        return self.n_trials

    def __getitem__(self, i: int) -> TrialScenario:
        return TrialScenario(int(i), self.years, self.pop[i], self.gdp[i], self.co2[i], self.ch4[i], self.n2o[i])

    @property
    def trials(self) -> list[TrialScenario]:
        return [self[i] for i in range(self.n_trials)]

    def head(self, n: int) -> "ScenarioEnsemble":
        """First n trials (trial ids are preserved because they are positional)."""
        if n > self.n_trials:
            raise ValueError(f"ensemble has {self.n_trials} trials, asked for {n}")
        return ScenarioEnsemble(
            self.years, self.pop[:n], self.gdp[:n], self.co2[:n], self.ch4[:n], self.n2o[:n],
            source=f"{self.source}[:{n}]",
        )


def _check_grid(years: np.ndarray) -> None:
    if years.size < 2:
        raise ValidationError("year grid needs at least two years")
    steps = np.diff(years)
    if np.any(steps != 1):
        k = int(np.flatnonzero(steps != 1)[0])
        if steps[k] > 1:
            raise ValidationError(f"year grid has a gap: missing {years[k] + 1}")
        raise ValidationError(f"year grid not strictly increasing at {years[k + 1]}")


def _check_positive(ens: ScenarioEnsemble) -> None:
    for name in SERIES:
        arr = getattr(ens, name)
        bad = ~(np.isfinite(arr) & (arr > 0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValidationError(
                f"{name} must be finite and > 0: trial {i}, year {ens.years[j]} has {arr[i, j]!r}"
            )


def growth_path(t: TrialScenario) -> np.ndarray:
    """Per-capita income growth g_t = pc_t / pc_{t-1} - 1, one shorter than the grid."""
    pc = t.gdp / t.population
    return pc[1:] / pc[:-1] - 1.0


# ---------------------------------------------------------------- CSV I/O


@dataclass(frozen=True)
class ScenarioSchema:
    """Column names in the file and multiplicative unit conversions into
    persons, 2020USD, GtCO2, MtCH4 and MtN2O."""

    columns: dict = field(default_factory=lambda: {c: c for c in COLUMNS})
    scale: dict = field(default_factory=lambda: {c: 1.0 for c in SERIES})


def write_ensemble(ens: ScenarioEnsemble, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        arrays = [getattr(ens, name) for name in SERIES]
        for i in range(ens.n_trials):
            rows = zip(*(a[i].tolist() for a in arrays))
            for year, vals in zip(ens.years.tolist(), rows):
                w.writerow([i, year, *map(repr, vals)])


def load_ensemble(path, schema: ScenarioSchema | None = None) -> ScenarioEnsemble:
    schema = schema or ScenarioSchema()
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"scenario file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        idx = {}
        for col in COLUMNS:
            name = schema.columns.get(col, col)
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}")
            idx[col] = header.index(name)
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    try:
        trial = np.array([int(r[idx["trial"]]) for r in rows])
        year = np.array([int(r[idx["year"]]) for r in rows])
        vals = {c: np.array([float(r[idx[c]]) for r in rows]) * schema.scale.get(c, 1.0) for c in SERIES}
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: unparseable row ({exc})") from None

    ids = np.unique(trial)
    if ids[0] != 0 or ids[-1] != ids.size - 1:
        raise ValidationError(f"{path}: trial ids must be 0..N-1 without gaps")
    order = np.lexsort((year, trial))
    trial, year = trial[order], year[order]
    vals = {c: v[order] for c, v in vals.items()}
    counts = np.bincount(trial)
    first = year[trial == 0]
    _check_grid(first)
    for t in ids:
        yt = year[trial == t]
        if yt.size != first.size or np.any(yt != first):
            missing = sorted(set(first.tolist()) - set(yt.tolist()))
            where = f"missing {missing[0]}" if missing else "differs from trial 0"
            raise ValidationError(f"{path}: trial {t} year grid {where}")
    if np.any(counts != first.size):
        raise ValidationError(f"{path}: duplicate (trial, year) rows")
    shape = (ids.size, first.size)
    return ScenarioEnsemble(
        first, *(vals[c].reshape(shape) for c in SERIES), source=str(path)
    )


# ---------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SynthTargets:
    """Ensemble-level anchors and the volatility knobs of the synthesizer."""

    start_year: int = START_YEAR
    end_year: int = END_YEAR
    pop_start: float = 331.5e6
    pop_peak: float = 392.0e6
    pop_peak_year: int = 2150
    pop_end: float = 362.0e6
    income_start: float = 63_500.0
    g0: float = 0.017
    g_mid: float = 0.015
    g_late: float = 0.010
    mid_span: tuple = (2030, 2100)
    late_from: int = 2200
    growth_persistence: float = 0.97
    growth_vol: float = 0.0015
    growth_noise: float = 0.005
    pop_persistence: float = 0.98
    pop_vol: float = 0.0003
    # central global emission paths as (year, value) anchors, linear in between
    co2_path: tuple = ((2020, 40.0), (2030, 40.0), (2050, 36.0), (2100, 22.0), (2150, 12.0), (2200, 6.0), (2300, 2.0))
    ch4_path: tuple = ((2020, 380.0), (2050, 360.0), (2100, 300.0), (2200, 250.0), (2300, 230.0))
    n2o_path: tuple = ((2020, 11.0), (2100, 11.5), (2300, 11.0))
    emissions_sigma: float = 0.35
    emissions_sigma_year: int = 2100
    emissions_growth_corr: float = 0.6

    def problems(self) -> list[str]:
        p = []
        if self.end_year <= self.start_year + 1:
            p.append("end_year must exceed start_year + 1")
        if not self.start_year < self.pop_peak_year < self.end_year:
            p.append(f"pop_peak_year {self.pop_peak_year} must lie strictly inside ({self.start_year}, {self.end_year})")
        if not (self.pop_peak > self.pop_start > 0 and self.pop_peak > self.pop_end > 0):
            p.append("population anchors must be positive with the peak above both ends")
        if self.income_start <= 0:
            p.append("income_start must be > 0")
        for name in ("g0", "g_mid", "g_late"):
            if not -0.5 < getattr(self, name) < 0.5:
                p.append(f"{name} outside (-0.5, 0.5)")
        lo, hi = self.mid_span
        if not self.start_year < lo < hi < self.late_from < self.end_year:
            p.append("need start_year < mid_span < late_from < end_year")
        for name in ("growth_persistence", "pop_persistence"):
            if not 0 <= getattr(self, name) < 1:
                p.append(f"{name} must be in [0, 1)")
        for name in ("growth_vol", "growth_noise", "pop_vol", "emissions_sigma"):
            if getattr(self, name) < 0:
                p.append(f"{name} must be >= 0")
        if not -1 <= self.emissions_growth_corr <= 1:
            p.append("emissions_growth_corr must be in [-1, 1]")
        for name in ("co2_path", "ch4_path", "n2o_path"):
            path = getattr(self, name)
            yrs = [y for y, _ in path]
            if len(path) < 1 or any(v <= 0 for _, v in path) or yrs != sorted(set(yrs)):
                p.append(f"{name} needs increasing years and positive values")
        return p

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.end_year + 1)

    def population_path(self) -> np.ndarray:
        x = [self.start_year, self.pop_peak_year, self.end_year]
        y = [self.pop_start, self.pop_peak, self.pop_end]
        return PchipInterpolator(x, y)(self.years)

    def growth_target(self) -> np.ndarray:
        """Target per-capita growth by year; entry 0 (the start year) is unused."""
        lo, hi = self.mid_span
        xs = [self.start_year + 1, lo, hi, self.late_from, self.end_year]
        ys = [self.g0, self.g_mid, self.g_mid, self.g_late, self.g_late]
        return np.interp(self.years, xs, ys)

    def central_emissions(self, gas: str) -> np.ndarray:
        path = getattr(self, f"{gas}_path")
        return np.interp(self.years, [y for y, _ in path], [v for _, v in path])


def _ar1_cumsum_variance(phi: float, sigma: float, n: int) -> np.ndarray:
    """Var of S_t = sum_{s<=t} z_s with z an AR(1) started at zero, t = 1..n."""
    var_s = np.empty(n)
    vz = 0.0   # Var z_t
    cov = 0.0  # Cov(S_{t-1}, z_t)
    vs = 0.0
    for t in range(n):
        vz = phi * phi * vz + sigma * sigma
        vs = vs + vz + 2.0 * cov
        var_s[t] = vs
        cov = phi * (cov + vz)
    return var_s


def synth_ensemble(n_trials: int, seed: int, targets: SynthTargets | None = None) -> ScenarioEnsemble:
    """Draw n_trials scenario paths; trial i depends only on (seed, i)."""
    targets = targets or SynthTargets()
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    problems = targets.problems()
    if problems:
        raise ConfigError(problems)

    years = targets.years
    n_years = years.size
    steps = n_years - 1
    eps_g = np.empty((n_trials, steps))
    eps_w = np.empty((n_trials, steps))
    eps_p = np.empty((n_trials, steps))
    xi = np.empty(n_trials)
    for i in range(n_trials):
        draws = trial_rng(seed, i, "scenario").standard_normal(3 * steps + 1)
        eps_g[i], eps_w[i], eps_p[i] = draws[:steps], draws[steps:2 * steps], draws[2 * steps:3 * steps]
        xi[i] = draws[-1]

    # income: log growth = log(1 + target) + AR(1) deviation + white noise,
    # shifted by half the variance so that E[growth] hits the target
    phi, sig, sig_w = targets.growth_persistence, targets.growth_vol, targets.growth_noise
    target = targets.growth_target()[1:]
    dev = np.empty((n_trials, steps))
    x = np.zeros(n_trials)
    var_x = np.empty(steps)
    v = 0.0
    for t in range(steps):
        x = phi * x + sig * eps_g[:, t]
        dev[:, t] = x
        v = phi * phi * v + sig * sig
        var_x[t] = v
    log_g = np.log1p(target) + dev + sig_w * eps_w - 0.5 * (var_x + sig_w**2)
    log_pc = np.log(targets.income_start) + np.concatenate([np.zeros((n_trials, 1)), np.cumsum(log_g, axis=1)], axis=1)

    # population: log deviation is the running sum of an AR(1) growth shock
    phi_p, sig_p = targets.pop_persistence, targets.pop_vol
    z = np.zeros(n_trials)
    y = np.zeros((n_trials, n_years))
    for t in range(steps):
        z = phi_p * z + sig_p * eps_p[:, t]
        y[:, t + 1] = y[:, t] + z
    var_y = np.concatenate([[0.0], _ar1_cumsum_variance(phi_p, sig_p, steps)])
    pop = targets.population_path() * np.exp(y - 0.5 * var_y)
    gdp = np.exp(log_pc) * pop

    # emissions factor correlated with the trial's average growth deviation
    # over the first epoch; z_growth is exactly standard normal by construction
    k_end = min(targets.emissions_sigma_year - targets.start_year, steps)
    weights = np.array([(1 - phi ** (k_end - k)) / (1 - phi) if phi > 0 else 1.0 for k in range(k_end)])
    z_growth = eps_g[:, :k_end] @ weights / np.sqrt(np.sum(weights**2))
    rho = targets.emissions_growth_corr
    z_em = rho * z_growth + np.sqrt(1 - rho * rho) * xi
    ramp = np.clip((years - targets.start_year) / (targets.emissions_sigma_year - targets.start_year), 0.0, 1.0)
    s = targets.emissions_sigma * ramp
    factor = np.exp(np.outer(z_em, s) - 0.5 * s * s)
    co2 = targets.central_emissions("co2") * factor
    ch4 = targets.central_emissions("ch4") * factor
    n2o = targets.central_emissions("n2o") * factor
    return ScenarioEnsemble(years, pop, gdp, co2, ch4, n2o, source=f"synthetic(seed={seed},n={n_trials})")
