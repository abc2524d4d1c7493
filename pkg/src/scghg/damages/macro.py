"""Macroeconomic damage families.

Every family maps a U.S. temperature path to a log-GDP gap against a
no-climate-change counterfactual (T held at `t_base`). Conventions shared by
all families:

* inputs are (trials, years) arrays carrying a history prefix of `start`
  years before the first damage year; lagged levels and trailing means read
  that history
* shock-accumulating families (growth, innovation, TFP, convergence and CRR
  forms) start accumulating at `start`, so the anomaly already present in the
  first damage year enters as that year's shock
* loss_frac = 1 - exp(gap), positive for losses
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import MappingProxyType

import numpy as np
from scipy.optimize import linprog

from .. import _toml
from .._jit import resolve_backend
from ..errors import ConfigError, FitError, NoOptimumError
from ..kernels import macro as K

T_BASE = 13.62
T_EVAL = 16.3

STUDY_FAMILY = {
    "Burke2015": "PermanentGrowth",
    "Newell2021": "LevelQuadratic",
    "Kalkuhl2020": "LevelInteracted",
    "Acevedo2020": "FiniteImpulse",
    "Kahn2021": "ArdlAdaptation",
    "Casey2023": "TfpSolow",
    "Harding2023": "Convergence",
    "Nath2024": "StateDependentCRR",
}
IRF_ONLY_STUDIES = {"DJO2012": "PermanentGrowth"}
FAMILIES = tuple(sorted(set(STUDY_FAMILY.values())))


def _quad(b1, b2, t):
    return b1 * t + b2 * t * t


def _as_list(x):
    return [float(v) for v in (x if isinstance(x, (list, tuple)) else [x])]


# ---------------------------------------------------------------- payload schema

# family -> {key: (kind, default)}; default None means required
_SCHEMA = {
    "PermanentGrowth": {"beta1": ("list", None), "beta2": ("list", None)},
    "LevelQuadratic": {"beta1": ("float", None), "beta2": ("float", None)},
    "LevelInteracted": {"beta1": ("float", None), "beta2": ("float", None),
                        "lag_weights": ("list", [1.0])},
    "FiniteImpulse": {"beta1": ("list", None), "beta2": ("list", None),
                      "mode": ("str", "levels")},
    "ArdlAdaptation": {"window": ("int", 30), "beta_pos": ("list", None), "beta_neg": ("list", None),
                       "ar": ("list", []), "cf_trend": ("float", 0.0)},
    "TfpSolow": {"beta1": ("float", None), "beta2": ("float", None), "carry": ("float", None),
                 "savings": ("float", 0.25), "capital_share": ("float", 0.3),
                 "depreciation": ("float", 0.06)},
    "Convergence": {"beta1": ("float", None), "beta2": ("float", None), "carry": ("float", None)},
    "StateDependentCRR": {"knots": ("list", None), "values": ("list", None), "smoothing": ("float", 1.0),
                          "window": ("int", 30), "horizon": ("int", 9), "persistence": ("float", 0.09),
                          "scale": ("float", 1.0)},
}
_COMMON = {"se": ("dict", {})}


def _coerce(kind, value, where):
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "list":
            return tuple(_as_list(value))
        if kind == "str":
            return str(value)
        if kind == "dict":
            return dict(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind}, got {value!r}") from None
    raise AssertionError(kind)


def _family_problems(family: str, c: dict, where: str) -> list[str]:
    p = []
    if family == "PermanentGrowth" and len(c["beta1"]) != len(c["beta2"]):
        p.append(f"{where}: beta1 and beta2 need one entry per lag")
    if family == "FiniteImpulse":
        if len(c["beta1"]) != len(c["beta2"]) or not c["beta1"]:
            p.append(f"{where}: beta1 and beta2 need one entry per horizon")
        if c["mode"] not in ("levels", "innovations"):
            p.append(f"{where}: mode must be 'levels' or 'innovations'")
    if family == "LevelInteracted" and not c["lag_weights"]:
        p.append(f"{where}: lag_weights must be non-empty")
    if family == "ArdlAdaptation":
        if c["window"] < 1:
            p.append(f"{where}: window must be >= 1")
        if len(c["beta_pos"]) != len(c["beta_neg"]) or not c["beta_pos"]:
            p.append(f"{where}: beta_pos and beta_neg need one entry per lag")
    if family in ("TfpSolow", "Convergence") and not 0.0 <= c["carry"] < 1.0:
        p.append(f"{where}: carry must be in [0, 1)")
    if family == "TfpSolow":
        for k in ("savings", "capital_share", "depreciation"):
            if not 0.0 < c[k] <= 1.0 or (k != "depreciation" and c[k] >= 1.0):
                p.append(f"{where}: {k} out of range")
    if family == "StateDependentCRR":
        kn, vals = c["knots"], c["values"]
        if len(kn) != len(vals) or len(kn) < 2:
            p.append(f"{where}: knots and values need equal length >= 2")
        elif np.any(np.diff(kn) <= 0):
            p.append(f"{where}: knots must be strictly increasing")
        else:
            if np.any(np.diff(vals) > 0):
                p.append(f"{where}: CRR values must be non-increasing in mean temperature")
            if c["smoothing"] < 0 or (len(kn) > 2 and 2 * c["smoothing"] > np.min(np.diff(kn))):
                p.append(f"{where}: smoothing half-width must be in [0, half the smallest knot gap]")
        if c["window"] < 1 or c["horizon"] < 0:
            p.append(f"{where}: window must be >= 1 and horizon >= 0")
        if not 0.0 < c["persistence"] < 1.0:
            p.append(f"{where}: persistence must be in (0, 1)")
    return p


@dataclass(frozen=True)
class MacroSpec:
    study: str
    family: str
    coefficients: MappingProxyType
    t_base: float = T_BASE
    irf_only: bool = False

    def __post_init__(self):
        where = f"macro[{self.study}]"
        problems = []
        if self.family not in _SCHEMA:
            raise ConfigError(f"{where}: unknown family {self.family!r}; known {FAMILIES}")
        expected = STUDY_FAMILY.get(self.study) or IRF_ONLY_STUDIES.get(self.study)
        if expected and expected != self.family:
            problems.append(f"{where}: study {self.study} uses family {expected}, not {self.family}")
        schema = {**_SCHEMA[self.family], **_COMMON}
        raw = dict(self.coefficients)
        unknown = sorted(set(raw) - set(schema))
        if unknown:
            problems.append(f"{where}: unknown coefficient keys {unknown}")
        coef = {}
        for key, (kind, default) in schema.items():
            if key in raw:
                try:
                    coef[key] = _coerce(kind, raw[key], f"{where}.{key}")
                except ConfigError as exc:
                    problems.extend(exc.problems)
            elif default is None:
                problems.append(f"{where}: missing coefficient {key!r}")
            else:
                coef[key] = tuple(default) if isinstance(default, list) else default
        if not problems:
            problems += _family_problems(self.family, coef, where)
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "coefficients", MappingProxyType(coef))

    def c(self, key):
        return self.coefficients[key]

    def with_coefficients(self, **changes) -> "MacroSpec":
        return replace(self, coefficients={**self.coefficients, **changes})

    def to_dict(self) -> dict:
        coef = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.coefficients.items()
                if not (k == "se" and not v)}
        return {"study": self.study, "family": self.family, "t_base": self.t_base,
                "irf_only": self.irf_only, "coefficients": coef}


def spec_from_mapping(d: dict, where: str = "payload") -> MacroSpec:
    d = dict(d)
    allowed = {"study", "family", "t_base", "irf_only", "coefficients", "notes"}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    for key in ("study", "family", "coefficients"):
        if key not in d:
            raise ConfigError(f"{where}: missing {key!r}")
    return MacroSpec(str(d["study"]), str(d["family"]), d["coefficients"],
                     float(d.get("t_base", T_BASE)), bool(d.get("irf_only", False)))


def load_spec(name_or_path) -> MacroSpec:
    """Bundled payload by study name, or a payload TOML file path."""
    name = str(name_or_path)
    if name in STUDY_FAMILY or name in IRF_ONLY_STUDIES:
        text = resources.files("scghg.data").joinpath("studies").joinpath(f"{name}.toml").read_text(encoding="utf-8")
        return spec_from_mapping(_toml.loads(text), name)
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"unknown study {name!r} and no payload file at that path")
    return spec_from_mapping(_toml.load_path(path), str(path))


def all_specs(include_irf_only: bool = False) -> list[MacroSpec]:
    names = list(STUDY_FAMILY) + (list(IRF_ONLY_STUDIES) if include_irf_only else [])
    return [load_spec(n) for n in names]


# ---------------------------------------------------------------- family math


def crr_curve(tbar, knots, values, smoothing):
    """Piecewise-linear CRR(mean temperature) with C1 quadratic corner blends.

    Each interior corner is replaced by a parabola on [knot - w, knot + w];
    outside the blends the curve is exactly the piecewise-linear one.
    """
    x = np.asarray(tbar, dtype=float)
    kn = np.asarray(knots, dtype=float)
    v = np.asarray(values, dtype=float)
    slopes = np.diff(v) / np.diff(kn)
    out = v[0] + slopes[0] * (x - kn[0])
    w = float(smoothing)
    for k in range(1, kn.size - 1):
        z = x - kn[k]
        if w > 0:
            ramp = np.where(z <= -w, 0.0, np.where(z >= w, z, (z + w) ** 2 / (4.0 * w)))
        else:
            ramp = np.maximum(z, 0.0)
        out = out + (slopes[k] - slopes[k - 1]) * ramp
    return out


def _crr_weights(horizon: int, persistence: float) -> np.ndarray:
    """Phase-in weights p_0..p_H from the temperature persistence profile.

    With per-year persistence phi (phi**H = persistence), an innovation's
    effect at horizon h scales with the cumulative temperature response
    sum_{j<=h} phi**j, normalized to 1 at H.
    """
    if horizon == 0:
        return np.ones(1)
    phi = persistence ** (1.0 / horizon)
    cum = np.cumsum(phi ** np.arange(horizon + 1))
    return cum / cum[-1]


def _lagged(temps, start, lag):
    """Columns start-lag .. end-lag of an extended array."""
    T = temps.shape[1] - start
    return temps[:, start - lag:start - lag + T]


def _trailing_deviation(temps, start, window, n_out):
    """(1/m) * sum_{j=1..m} (T_t - T_{t-j}) for output columns t >= start - extra."""
    lo = start - (n_out - (temps.shape[1] - start))  # first extended column needed
    cols = temps.shape[1] - lo
    acc = np.zeros((temps.shape[0], cols))
    for j in range(1, window + 1):
        acc += temps[:, lo:] - temps[:, lo - j:lo - j + cols]
    return acc / window


def _trailing_mean(temps, start, window):
    T = temps.shape[1] - start
    acc = np.zeros((temps.shape[0], T))
    for j in range(1, window + 1):
        acc += temps[:, start - j:start - j + T]
    return acc / window


def history_needed(spec: MacroSpec) -> int:
    f, c = spec.family, spec.coefficients
    if f == "PermanentGrowth":
        return len(c["beta1"]) - 1
    if f == "LevelInteracted":
        return len(c["lag_weights"]) - 1
    if f == "FiniteImpulse":
        return len(c["beta1"]) - 1
    if f == "ArdlAdaptation":
        return c["window"] + len(c["beta_pos"]) - 1
    if f == "StateDependentCRR":
        return c["window"]
    return 0


def log_gap(spec: MacroSpec, temps, start: int, gdp=None, backend: str = "auto") -> np.ndarray:
    """Log-GDP gap (trials, years after start) for extended temperatures."""
    temps = np.ascontiguousarray(np.atleast_2d(temps), dtype=float)
    if start < history_needed(spec):
        raise ValueError(f"{spec.study}: needs {history_needed(spec)} history years, got {start}")
    n, T = temps.shape[0], temps.shape[1] - start
    cur = temps[:, start:]
    c, tb, f = spec.coefficients, spec.t_base, spec.family
    use_numba = resolve_backend(backend) == "numba"

    if f == "PermanentGrowth":
        w = np.zeros((n, T))
        for lag, (b1, b2) in enumerate(zip(c["beta1"], c["beta2"])):
            w += _quad(b1, b2, _lagged(temps, start, lag)) - _quad(b1, b2, tb)
        return np.cumsum(w, axis=1)

    if f == "LevelQuadratic":
        return _quad(c["beta1"], c["beta2"], cur) - _quad(c["beta1"], c["beta2"], tb)

    if f == "LevelInteracted":
        # the first-difference x level interaction telescopes into a level form
        b1, b2 = c["beta1"], c["beta2"]
        out = np.zeros((n, T))
        for lag, wgt in enumerate(c["lag_weights"]):
            out += wgt * (_quad(b1, b2, _lagged(temps, start, lag)) - _quad(b1, b2, tb))
        return out

    if f == "FiniteImpulse":
        b1s, b2s = c["beta1"], c["beta2"]
        H = len(b1s) - 1
        if c["mode"] == "levels":
            out = np.zeros((n, T))
            for h in range(H + 1):
                out += _quad(b1s[h], b2s[h], _lagged(temps, start, h)) - _quad(b1s[h], b2s[h], tb)
            return out
        # innovations: each year's change phases in along the cumulative profile
        padded = np.concatenate([np.full((n, H + 1), tb), cur], axis=1)  # pre-start := t_base
        out = np.zeros((n, T))
        for j in range(H):
            now = padded[:, H + 1 - j:H + 1 - j + T]
            prev = padded[:, H - j:H - j + T]
            out += _quad(b1s[j], b2s[j], now) - _quad(b1s[j], b2s[j], prev)
        held = padded[:, 1:1 + T]  # T_{t-H}
        out += _quad(b1s[H], b2s[H], held) - _quad(b1s[H], b2s[H], tb)
        return out

    if f == "Convergence":
        shock = np.ascontiguousarray(_quad(c["beta1"], c["beta2"], cur) - _quad(c["beta1"], c["beta2"], tb))
        out = np.empty((n, T))
        (K.convergence_numba if use_numba else K.convergence_numpy)(shock, float(c["carry"]), out)
        return out

    if f == "TfpSolow":
        if gdp is None:
            gdp = np.ones((n, T))
        gdp = np.ascontiguousarray(np.broadcast_to(np.asarray(gdp, dtype=float), (n, T)))
        shock = np.ascontiguousarray(_quad(c["beta1"], c["beta2"], cur) - _quad(c["beta1"], c["beta2"], tb))
        g0 = gdp[:, 1] / gdp[:, 0] - 1.0 if T > 1 else np.zeros(n)
        out = np.empty((n, T))
        (K.solow_numba if use_numba else K.solow_numpy)(
            shock, gdp, float(c["carry"]), float(c["savings"]), float(c["capital_share"]),
            float(c["depreciation"]), np.ascontiguousarray(g0), out)
        return out

    if f == "ArdlAdaptation":
        return _ardl_gap(spec, temps, start, use_numba) - _ardl_gap(
            spec, _ardl_counterfactual(spec, temps.shape[1], start)[None, :], start, use_numba)

    if f == "StateDependentCRR":
        tbar = _trailing_mean(temps, start, c["window"])
        crr = c["scale"] * crr_curve(tbar, c["knots"], c["values"], c["smoothing"])
        prev = np.concatenate([np.full((n, 1), tb), cur[:, :-1]], axis=1)
        ce = crr * (cur - prev)
        p = _crr_weights(c["horizon"], c["persistence"])
        H = p.size - 1
        out = np.zeros((n, T))
        for j in range(H):
            out[:, j:] += p[j] * ce[:, :T - j]
        if T > H:
            out[:, H:] += p[H] * np.cumsum(ce, axis=1)[:, :T - H]
        return out

    raise AssertionError(f)


def _ardl_counterfactual(spec: MacroSpec, n_ext: int, start: int) -> np.ndarray:
    trend = spec.c("cf_trend")
    if trend == 0.0:
        return np.full(n_ext, spec.t_base)
    return spec.t_base + trend * (np.arange(n_ext) - start)


def _ardl_gap(spec, temps, start, use_numba):
    c = spec.coefficients
    p = len(c["beta_pos"])
    T = temps.shape[1] - start
    # driver columns cover start-(p-1) .. end so lags read the history
    driver = _trailing_deviation(temps, start, c["window"], T + p - 1)
    out = np.empty((temps.shape[0], T))
    (K.ardl_numba if use_numba else K.ardl_numpy)(
        np.ascontiguousarray(driver), p - 1, np.array(c["beta_pos"]), np.array(c["beta_neg"]),
        np.array(c["ar"], dtype=float), out)
    return out


def ardl_driver(spec: MacroSpec, temps, start: int) -> np.ndarray:
    """Deviation of T_t from its trailing mean, on the damage grid."""
    temps = np.atleast_2d(np.asarray(temps, dtype=float))
    T = temps.shape[1] - start
    return _trailing_deviation(temps, start, spec.c("window"), T)


# ---------------------------------------------------------------- public ops


@dataclass(frozen=True)
class DamagePath:
    years: np.ndarray
    log_gap: np.ndarray

    @property
    def loss_frac(self) -> np.ndarray:
        return -np.expm1(self.log_gap)


def run_damage(spec: MacroSpec, us_temp, scenario=None, backend: str = "auto") -> DamagePath:
    """Single-trial damages on the scenario grid.

    `us_temp.years` must end on the scenario grid and may start earlier; the
    earlier years are used as history.
    """
    if spec.irf_only:
        raise ConfigError(f"{spec.study} payload is for impulse responses only")
    years = np.asarray(us_temp.years)
    if scenario is None:
        grid = years
    else:
        grid = np.asarray(scenario.years)
    hit = np.flatnonzero(years == grid[0])
    if hit.size == 0 or years.size - hit[0] != grid.size or np.any(years[hit[0]:] != grid):
        raise ValueError("temperature path and scenario grid are misaligned")
    start = int(hit[0])
    gdp = None if scenario is None else np.asarray(scenario.gdp)[None, :]
    temps = np.asarray(us_temp.level, dtype=float)[None, :]
    if start < history_needed(spec):
        pad = history_needed(spec) - start
        temps = np.concatenate([np.full((1, pad), spec.t_base), temps], axis=1)
        start += pad
    gap = log_gap(spec, temps, start, gdp, backend)[0]
    if not np.all(np.isfinite(gap)):
        raise FitError(f"{spec.study}: non-finite damages")
    return DamagePath(grid, gap)


def impulse_response(spec: MacroSpec, t_eval: float = T_EVAL, horizon: int = 20,
                     method: str = "marginal", shock: float = 1.0, backend: str = "numpy") -> np.ndarray:
    """Cumulative ln-GDP response at horizons 0..horizon to a one-year shock.

    Background temperature and counterfactual are both held at `t_eval`.
    "marginal" returns the derivative per degC (central difference, exact for
    quadratic responses); "finite" applies a literal `shock`-degree shock.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    sp = replace(spec, t_base=float(t_eval), irf_only=False)
    hist = max(history_needed(sp), 1) + 1
    T = horizon + 1
    base = np.full(hist + T, float(t_eval))

    def run(delta):
        temps = base.copy()
        temps[hist] += delta
        return log_gap(sp, temps[None, :], hist, None, backend)[0]

    if method == "marginal":
        d = 1e-3
        return (run(d) - run(-d)) / (2 * d)
    if method == "finite":
        return run(shock) - run(0.0)
    raise ValueError("method must be 'marginal' or 'finite'")


def impulse_band(spec: MacroSpec, t_eval: float = T_EVAL, horizon: int = 20, z: float = 1.959963984540054):
    """95% band from payload standard errors (independent coefficients, delta method).

    Returns (lo, hi), or (None, None) if the payload has no standard errors.
    """
    se = dict(spec.coefficients.get("se", {}))
    if not se:
        return None, None
    base = impulse_response(spec, t_eval, horizon)
    var = np.zeros_like(base)
    for key, s in se.items():
        vals = list(_as_list(spec.c(key)))
        sds = _as_list(s)
        for k, (v, sd) in enumerate(zip(vals, sds)):
            bumped = vals.copy()
            bumped[k] = v + sd
            new = bumped if isinstance(spec.c(key), tuple) else bumped[0]
            var += (impulse_response(spec.with_coefficients(**{key: new}), t_eval, horizon) - base) ** 2
    sd = np.sqrt(var)
    return base - z * sd, base + z * sd


def optimum_of(spec: MacroSpec) -> float:
    """Temperature maximizing output under the family's long-run response."""
    f, c = spec.family, spec.coefficients
    if f == "StateDependentCRR":
        return _crr_root(c)
    if f == "ArdlAdaptation":
        raise NoOptimumError("ArdlAdaptation responses are to deviations, not levels")
    if f == "PermanentGrowth" or (f == "FiniteImpulse" and c["mode"] == "levels"):
        b1, b2 = sum(c["beta1"]), sum(c["beta2"])
    elif f == "FiniteImpulse":
        b1, b2 = c["beta1"][-1], c["beta2"][-1]
    else:
        b1, b2 = c["beta1"], c["beta2"]
    return quadratic_optimum(b1, b2)


def quadratic_optimum(b1: float, b2: float) -> float:
    if not b2 < 0:
        raise NoOptimumError(f"no interior optimum: beta2 = {b2} is not negative")
    return -b1 / (2.0 * b2)


def _crr_root(c) -> float:
    kn, v, w = np.asarray(c["knots"]), np.asarray(c["values"]), c["smoothing"]
    for k in range(kn.size - 1):
        if v[k] >= 0 >= v[k + 1] and v[k] != v[k + 1]:
            root = kn[k] + v[k] * (kn[k + 1] - kn[k]) / (v[k] - v[k + 1])
            inside = all(abs(root - kn[j]) >= w for j in range(1, kn.size - 1))
            if inside:
                return float(root)
            from scipy.optimize import brentq
            f = lambda x: float(crr_curve(x, kn, v, w))
            return float(brentq(f, kn[k] - w, kn[k + 1] + w, xtol=1e-14))
    raise NoOptimumError("CRR curve has no sign change")


# ---------------------------------------------------------------- surface fit


@dataclass(frozen=True)
class SurfaceFit:
    mean: tuple
    q05: tuple
    q95: tuple

    def curve(self, which: str, t):
        b1, b2 = getattr(self, which)
        t = np.asarray(t, dtype=float)
        return b1 * t + b2 * t * t


def _quantile_fit(X, y, tau):
    n, k = X.shape
    # variables: beta (free), u+ >= 0, u- >= 0; X beta + u+ - u- = y
    cost = np.concatenate([np.zeros(k), np.full(n, tau), np.full(n, 1.0 - tau)])
    A_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * k + [(0, None)] * (2 * n)
    res = linprog(cost, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise FitError(f"quantile fit failed at tau={tau}: {res.message}")
    return tuple(float(b) for b in res.x[:k])


def fit_damage_surface(losses_2100, temps_2100) -> SurfaceFit:
    """No-intercept quadratic in warming: OLS for the mean, pinball loss for
    the 5th and 95th percentiles."""
    y = np.asarray(losses_2100, dtype=float)
    t = np.asarray(temps_2100, dtype=float)
    if y.shape != t.shape or y.ndim != 1:
        raise FitError("losses and temperatures must be 1-D and the same length")
    if y.size < 50:
        raise FitError(f"need at least 50 points, got {y.size}")
    X = np.column_stack([t, t * t])
    if np.linalg.matrix_rank(X) < 2:
        raise FitError("degenerate design: temperatures do not vary")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return SurfaceFit(tuple(float(b) for b in beta), _quantile_fit(X, y, 0.05), _quantile_fit(X, y, 0.95))
