"""Output writers, figure-data emitters and run manifests.

All CSVs are written with `repr` floats, LF line endings and a stable row
order, so identical runs produce identical bytes. Column schemas are listed
in FORMATS.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import numba, resolve_backend
from .config import RunConfig, to_mapping
from .damages import macro as M

FORMATS = {
    "scghg_table.csv": "source,gas,mode,market,nonmarket,total,total_q<q>... one row per run (USD2020/t)",
    "components.csv": "source,component,mean,q<q>... per-source decomposition (USD2020/t)",
    "trials.csv": "source,trial,param_id,gcm,market,nonmarket,<nonmarket sources>...,total (USD2020/t)",
    "irf.csv": "study,horizon,response,lo95,hi95 cumulative ln-GDP response per degC; blank band without standard errors",
    "surface.csv": "study,kind,temp,loss; kind is point, mean, q05 or q95; temp is 2100 GMST anomaly (degC)",
    "temp_paths.csv": "series,year,mean,q<q>... for series gmst and us_temp",
    "pairing.csv": "param_id,gcm",
    "manifest.json": "config snapshots, seeds, versions, checksums, timings and output digests",
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _qcols(qs):
    return [f"q{q!r}" for q in qs]


# ---------------------------------------------------------------- run outputs


def write_table(path, estimates, quantiles=None) -> Path:
    from .engine import table_rows
    header, rows = table_rows(estimates, quantiles)
    return write_csv(path, header, rows)


def write_components(path, estimates) -> Path:
    qs = estimates[0].config.quantiles
    rows = []
    for est in estimates:
        for name in est.components:
            qv = est.quantiles(name, qs)
            rows.append([est.label, name, est.component_mean(name)] + [qv[q] for q in qs])
    return write_csv(path, ["source", "component", "mean"] + _qcols(qs), rows)


def write_trials(path, estimates) -> Path:
    nm = list(estimates[0].config.nonmarket_sources)
    header = ["source", "trial", "param_id", "gcm", "market", "nonmarket"] + nm + ["total"]
    rows = []
    for est in estimates:
        c = est.components
        for k in range(est.trial_ids.size):
            rows.append([est.label, int(est.trial_ids[k]), int(est.param_ids[k]), est.gcm[k],
                         c["market"][k], c["nonmarket"][k]] + [c[s][k] for s in nm] + [c["total"][k]])
    return write_csv(path, header, rows)


# ---------------------------------------------------------------- figure data


def irf_rows(specs, t_eval: float = M.T_EVAL, horizon: int = 20, method: str = "marginal"):
    rows = []
    for spec in sorted(specs, key=lambda s: s.study):
        resp = M.impulse_response(spec, t_eval, horizon, method)
        lo, hi = M.impulse_band(spec, t_eval, horizon)
        for h in range(horizon + 1):
            rows.append([spec.study, h, resp[h],
                         None if lo is None else lo[h], None if hi is None else hi[h]])
    return rows


def surface_rows(study: str, temps_2100, losses_2100, grid_points: int = 61):
    temps = np.asarray(temps_2100, dtype=float)
    losses = np.asarray(losses_2100, dtype=float)
    fit = M.fit_damage_surface(losses, temps)
    order = np.lexsort((losses, temps))
    rows = [[study, "point", temps[k], losses[k]] for k in order]
    grid = np.linspace(0.0, float(temps.max()), grid_points)
    for kind, which in (("mean", "mean"), ("q05", "q05"), ("q95", "q95")):
        rows += [[study, kind, t, v] for t, v in zip(grid, fit.curve(which, grid))]
    return rows


def temp_path_rows(years, gmst, us_temp, quantiles=(0.05, 0.5, 0.95)):
    rows = []
    for name, arr in (("gmst", gmst), ("us_temp", us_temp)):
        arr = np.asarray(arr, dtype=float)
        mean = arr.mean(axis=0)
        qv = np.quantile(arr, quantiles, axis=0)
        for k, y in enumerate(years):
            rows.append([name, int(y), mean[k]] + [qv[j, k] for j in range(len(quantiles))])
    return rows


def emit_figure_data(kind: str, results, path, **kw) -> Path:
    """Write one figure-data CSV.

    kind "irf": results is a list of MacroSpec (kw: t_eval, horizon, method).
    kind "surface": results is a list of (study, temps_2100, losses_2100).
    kind "temp_paths": results is (years, gmst, us_temp) (kw: quantiles).
    """
    if kind == "irf":
        return write_csv(path, ["study", "horizon", "response", "lo95", "hi95"], irf_rows(results, **kw))
    if kind == "surface":
        rows = []
        for study, temps, losses in sorted(results, key=lambda r: r[0]):
            rows += surface_rows(study, temps, losses, **kw)
        return write_csv(path, ["study", "kind", "temp", "loss"], rows)
    if kind == "temp_paths":
        qs = tuple(kw.get("quantiles", (0.05, 0.5, 0.95)))
        years, gmst, us = results
        return write_csv(path, ["series", "year", "mean"] + _qcols(qs), temp_path_rows(years, gmst, us, qs))
    raise ValueError(f"unknown figure kind {kind!r}")


# ---------------------------------------------------------------- manifests


def versions() -> dict:
    import scipy
    return {"scghg": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": None if numba is None else numba.__version__}


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, configs, estimates=None, extra=None) -> Path:
    out_dir = Path(out_dir)
    outputs = {p.name: file_digest(p) for p in sorted(out_dir.iterdir())
               if p.is_file() and p.name != "manifest.json"}
    configs = list(configs)
    doc = {
        "command": command,
        "created_unix": time.time(),
        "argv": sys.argv,
        "backend": resolve_backend(configs[0].backend) if configs else None,
        "versions": versions(),
        "runs": [to_mapping(c) for c in configs],
        "seeds": sorted({c.seed for c in configs}),
        "outputs": outputs,
    }
    if estimates:
        doc["checksums"] = estimates[0].shared.checksums
        doc["timings"] = {e.label: e.timings for e in estimates}
        sh = estimates[0].shared
        doc["discounting"] = {"rho": sh.discount.rho, "eta": sh.discount.eta, "calibration": sh.calibration}
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
