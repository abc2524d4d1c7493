"""GCM ranking, hotness-rank pairing and affine U.S. downscaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .climate import GmstPath
from .errors import ConfigError, SchemaError, ValidationError

US_BASELINE = 13.62
DEFAULT_MEANS = (2.00, 3.78)
GCM_COLUMNS = ("name", "tcr", "ecs", "slope", "intercept")


@dataclass(frozen=True)
class GcmPattern:
    name: str
    tcr: float
    ecs: float
    slope: float
    intercept: float = 0.0

    def __post_init__(self):
        if not (self.tcr > 0 and self.ecs > 0):
            raise ValidationError(f"{self.name}: tcr and ecs must be > 0")
        if not self.slope > 0:
            raise ValidationError(f"{self.name}: slope must be > 0")


@dataclass(frozen=True)
class UsTempPath:
    years: np.ndarray
    level: np.ndarray


def weighted_sum(g: GcmPattern, ensemble_means=DEFAULT_MEANS) -> float:
    """Responsiveness score: TCR and ECS each normalized by an ensemble mean."""
    mean_tcr, mean_ecs = ensemble_means
    if not (mean_tcr > 0 and mean_ecs > 0):
        raise ConfigError("ensemble means must be > 0")
    return g.tcr / mean_tcr + g.ecs / mean_ecs


def rank_gcms(gcms, ensemble_means=DEFAULT_MEANS) -> list[GcmPattern]:
    """Coolest to hottest by weighted sum; names break ties."""
    return sorted(gcms, key=lambda g: (weighted_sum(g, ensemble_means), g.name))


def load_gcms(path=None) -> list[GcmPattern]:
    if path is None:
        text = resources.files("scghg.data").joinpath("gcms.csv").read_text(encoding="utf-8")
        src = "bundled gcms.csv"
    else:
        text = Path(path).read_text(encoding="utf-8")
        src = str(path)
    reader = csv.DictReader(text.splitlines())
    missing = [c for c in GCM_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"{src}: missing column {missing[0]!r}")
    out = []
    for row in reader:
        try:
            out.append(GcmPattern(row["name"], float(row["tcr"]), float(row["ecs"]),
                                  float(row["slope"]), float(row["intercept"])))
        except ValueError as exc:
            raise SchemaError(f"{src}: {exc}") from None
    if not out:
        raise SchemaError(f"{src}: no GCM rows")
    return out


@dataclass(frozen=True)
class PairingTable:
    assignments: dict      # param-set id -> gcm name
    group_sizes: tuple     # coolest group first
    gcm_order: tuple       # gcm names, coolest first

    def gcm_for(self, param_id: int) -> str:
        return self.assignments[int(param_id)]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("param_id", "gcm"))
            for pid in sorted(self.assignments):
                w.writerow((pid, self.assignments[pid]))


def group_sizes(n: int, k: int) -> list[int]:
    """Even split with the remainder going to the coolest groups."""
    base, extra = divmod(n, k)
    return [base + (1 if g < extra else 0) for g in range(k)]


def build_pairing(warmths, gcms, ids=None) -> PairingTable:
    """Sort parameter sets by warmth (ties by id) and hand out GCMs by rank.

    `gcms` must already be ranked coolest first (see `rank_gcms`).
    """
    warmths = np.asarray(warmths, dtype=float)
    gcms = list(gcms)
    if warmths.size == 0 or not gcms:
        raise ValueError("build_pairing needs at least one parameter set and one GCM")
    if not np.all(np.isfinite(warmths)):
        raise ValueError("warmths must be finite")
    ids = np.arange(warmths.size) if ids is None else np.asarray(ids, dtype=np.int64)
    if ids.size != warmths.size or np.unique(ids).size != ids.size:
        raise ValueError("ids must be unique and match warmths")
    order = np.lexsort((ids, warmths))
    sizes = group_sizes(warmths.size, len(gcms))
    assignments = {}
    start = 0
    for g, size in zip(gcms, sizes):
        for k in order[start:start + size]:
            assignments[int(ids[k])] = g.name
        start += size
    return PairingTable(assignments, tuple(sizes), tuple(g.name for g in gcms))


def _window_mean(years, anomaly, window):
    years = np.asarray(years)
    sel = (years >= window[0]) & (years <= window[1])
    if not sel.any():
        raise ValueError(f"baseline window {window} not covered by the GMST grid")
    return np.asarray(anomaly)[..., sel].mean(axis=-1)


def downscale(g: GmstPath, pattern: GcmPattern, us_baseline: float = US_BASELINE,
              window=(1980, 2010), regressor: str = "baseline_window") -> UsTempPath:
    """U.S. level = baseline + intercept + slope * regressor.

    regressor "baseline_window" uses the GMST anomaly relative to its mean over
    `window`; "preindustrial" uses the raw anomaly.
    """
    level = downscale_batch(g.years, g.anomaly, pattern.slope, pattern.intercept,
                            us_baseline, window, regressor)
    return UsTempPath(np.asarray(g.years), level)


def downscale_batch(years, gmst, slope, intercept, us_baseline=US_BASELINE,
                    window=(1980, 2010), regressor="baseline_window") -> np.ndarray:
    gmst = np.asarray(gmst, dtype=float)
    slope = np.asarray(slope, dtype=float)
    intercept = np.asarray(intercept, dtype=float)
    if regressor == "baseline_window":
        ref = _window_mean(years, gmst, window)[..., None]
    elif regressor == "preindustrial":
        ref = 0.0
    else:
        raise ConfigError(f"unknown downscaling regressor {regressor!r}")
    return us_baseline + intercept[..., None] + slope[..., None] * (gmst - ref)


def load_observed(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Observed series CSV `year,gmst,us_temp` for the historical check."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in ("year", "gmst", "us_temp"):
            if col not in (reader.fieldnames or []):
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = [(int(r["year"]), float(r["gmst"]), float(r["us_temp"])) for r in reader]
    y, g, u = map(np.array, zip(*rows))
    return y, g, u


def historical_mae(years, observed_gmst, observed_us, pattern: GcmPattern,
                   us_baseline: float = US_BASELINE, window=(1980, 2010),
                   regressor: str = "baseline_window") -> float:
    """Mean absolute error of the pattern driven by observed GMST."""
    pred = downscale(GmstPath(np.asarray(years), np.asarray(observed_gmst, dtype=float)),
                     pattern, us_baseline, window, regressor).level
    return float(np.mean(np.abs(pred - np.asarray(observed_us, dtype=float))))
