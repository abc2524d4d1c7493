"""Command-line entry point: `scghg run|irf|surface|calibrate|validate`.

Exit codes: 0 success, 2 config error, 3 validation error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import engine as E
from . import io
from .config import RunConfig, parse_config, parse_mapping, replace_run
from .damages import macro as M
from .damages.nonmarket import NONMARKET_SOURCES
from .discounting import calibrate
from .errors import ConfigError, ScghgError
from .feedbacks import FeedbackConfig
from .scenario import load_ensemble

log = logging.getLogger("scghg")


def _base_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return parse_config(args.config, require_sources=False)
    return RunConfig()


def _overrides(args, cfg: RunConfig) -> RunConfig:
    changes = {}
    for attr, key in (("gas", "gas"), ("pulse_year", "pulse_year"), ("pulse_size", "pulse_size"),
                      ("trials", "n_trials"), ("seed", "seed"), ("mode", "mode"), ("backend", "backend")):
        if getattr(args, attr, None) is not None:
            changes[key] = getattr(args, attr)
    if getattr(args, "quantiles", None) is not None:
        changes["quantiles"] = tuple(float(q) for q in args.quantiles.split(",") if q.strip())
    if getattr(args, "feedbacks", None) is not None:
        fb = cfg.feedbacks
        toggled = FeedbackConfig.from_toggle(args.feedbacks)
        changes["feedbacks"] = dataclasses.replace(fb, amazon=toggled.amazon, permafrost=toggled.permafrost)
    return replace_run(cfg, **changes)


def _nonmarket_list(text):
    if text is None:
        return None
    names = tuple(s.strip() for s in text.split(",") if s.strip() and s.strip() != "none")
    bad = [n for n in names if n not in NONMARKET_SOURCES]
    if bad:
        raise ConfigError(f"--nonmarket: unknown source(s) {bad}; expected {NONMARKET_SOURCES}")
    return names


def _study_list(text, cfg: RunConfig):
    if text is None:
        return [cfg.macro_study]
    if text == "all":
        return list(M.STUDY_FAMILY)
    if text == "none":
        return [None]
    return [s.strip() for s in text.split(",")]


def _run_configs(args) -> list[RunConfig]:
    if args.manifest:
        doc = io.read_manifest(args.manifest)
        cfgs = [parse_mapping(run, f"{args.manifest}:runs[{k}]") for k, run in enumerate(doc["runs"])]
        # pin the backend that actually ran so the rerun takes the same code path
        return [dataclasses.replace(c, backend=doc.get("backend") or c.backend) for c in cfgs]
    cfg = _overrides(args, _base_config(args))
    nm = _nonmarket_list(args.nonmarket)
    nm = cfg.nonmarket_sources if nm is None else nm
    out = []
    for study in _study_list(args.study, cfg):
        sources = ((f"macro:{study}",) if study else ()) + tuple(nm)
        out.append(dataclasses.replace(cfg, sources=sources).validated(require_sources=True))
    return out


def cmd_run(args) -> int:
    configs = _run_configs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shared = None
    estimates = []
    for cfg in configs:
        if shared is None:
            shared = E.prepare(cfg)
        else:
            shared = dataclasses.replace(shared, macro=E.load_macro_spec(cfg))
        est = E.scghg(cfg, shared)
        estimates.append(est)
        log.info("%s %s: %.2f USD/t", est.label, cfg.gas, est.mean)
    io.write_table(out / "scghg_table.csv", estimates)
    io.write_components(out / "components.csv", estimates)
    io.write_trials(out / "trials.csv", estimates)
    years, gmst, us_ext, start = E.baseline_climate(configs[0], shared)
    io.emit_figure_data("temp_paths", (years, gmst, us_ext[:, start:]), out / "temp_paths.csv",
                        quantiles=configs[0].quantiles)
    shared.pairing.write_csv(out / "pairing.csv")
    io.write_manifest(out, "run", configs, estimates)
    for est in estimates:
        print(f"{est.label}\t{est.config.gas}\t{est.config.mode}\t{est.mean:.4f}")
    return 0


def cmd_irf(args) -> int:
    names = list(M.STUDY_FAMILY) + list(M.IRF_ONLY_STUDIES) if args.study in (None, "all") \
        else [s.strip() for s in args.study.split(",")]
    specs = [M.load_spec(n) for n in names]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.emit_figure_data("irf", specs, out / "irf.csv", t_eval=args.t_eval, horizon=args.horizon,
                        method=args.method)
    io.write_manifest(out, "irf", [], extra={"irf": {"studies": names, "t_eval": args.t_eval,
                                                       "horizon": args.horizon, "method": args.method}})
    return 0


def cmd_surface(args) -> int:
    cfg = _overrides(args, _base_config(args))
    names = list(M.STUDY_FAMILY) if args.study in (None, "all") else [s.strip() for s in args.study.split(",")]
    cfg = dataclasses.replace(cfg, sources=()).validated()
    shared = E.prepare(cfg)
    results = []
    for name in names:
        spec = M.load_spec(name)
        temps, losses = E.surface_points(cfg, shared, spec, args.year)
        results.append((name, temps, losses))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.emit_figure_data("surface", results, out / "surface.csv")
    io.write_manifest(out, "surface", [cfg], extra={"surface": {"studies": names, "year": args.year}})
    return 0


def cmd_calibrate(args) -> int:
    cfg = _overrides(args, _base_config(args))
    d = cfg.discounting
    near = d.target_near if args.discount_target is None else args.discount_target
    horizon = d.far_horizon if args.far_horizon is None else args.far_horizon
    far = d.far_target if args.far_target is None else args.far_target
    if args.scenario:
        ens = load_ensemble(args.scenario)
    else:
        ens = E.synth_ensemble(cfg.n_trials, cfg.seed, cfg.scenario.targets)
    growth = np.diff(np.log(ens.income), axis=1)
    res = calibrate(growth, near, far, horizon, eta_default=d.eta)
    doc = {"rho": res.params.rho, "eta": res.params.eta, "near_residual": res.near_residual,
           "far_residual": res.far_residual, "flat": res.flat, "target_near": near,
           "far_horizon": horizon, "far_target": far, "scenario_checksum": ens.checksum}
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibration.json").write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_checks
    if args.config:
        parse_config(args.config, require_sources=False)
        print(f"config ok: {args.config}")
    if args.scenario:
        ens = load_ensemble(args.scenario)
        print(f"scenario ok: {ens.n_trials} trials, {ens.years[0]}-{ens.years[-1]}")
    failed = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 3 if failed else 0


def _add_run_options(p, with_sources=True):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--gas", choices=("co2", "ch4", "n2o"))
    p.add_argument("--pulse-year", type=int)
    p.add_argument("--pulse-size", type=float, help="pulse in gas units (GtCO2, MtCH4, MtN2O)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--feedbacks", choices=("on", "off", "amazon", "permafrost"))
    p.add_argument("--mode", choices=("independent", "integrated"))
    p.add_argument("--backend", choices=("auto", "numba", "numpy"))
    p.add_argument("--quantiles", help="comma-separated, e.g. 0.05,0.5,0.95")
    if with_sources:
        p.add_argument("--study", help="macro study name, 'all' or 'none'")
        p.add_argument("--nonmarket", help="comma-separated subset of mortality,wildfire,biodiversity")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scghg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo SC-GHG estimate")
    _add_run_options(p)
    p.add_argument("--manifest", help="re-run the configs recorded in a manifest.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("irf", help="impulse responses of GDP to a one-year temperature shock")
    p.add_argument("--study", help="study names or 'all' (default)")
    p.add_argument("--t-eval", type=float, default=M.T_EVAL)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--method", choices=("marginal", "finite"), default="marginal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_irf)

    p = sub.add_parser("surface", help="2100 GDP loss against warming, with fitted curves")
    _add_run_options(p, with_sources=False)
    p.add_argument("--study", help="study names or 'all' (default)")
    p.add_argument("--year", type=int, default=2100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("calibrate", help="fit rho and eta to near and far discount-rate targets")
    p.add_argument("--config")
    p.add_argument("--scenario", help="scenario CSV; synthetic ensemble when omitted")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--discount-target", type=float)
    p.add_argument("--far-horizon", type=int)
    p.add_argument("--far-target", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="check a config or scenario file and run the invariant suite")
    p.add_argument("--config")
    p.add_argument("--scenario")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return exc.exit_code
    except ScghgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
