"""Quick invariant suite behind `scghg validate`.

Each check returns (name, passed, detail). These are fast smoke versions of
the properties the test suite covers in depth.
"""

from __future__ import annotations

import numpy as np

from .damages import macro as M
from .damages import nonmarket as NM
from .discounting import GrowthDecomposition, RamseyParams, alpha_for_b12, two_good_rate
from .feedbacks import AmazonState, amazon_step
from .patterns import group_sizes


def _zero_anomaly():
    worst = 0.0
    for spec in M.all_specs():
        temps = np.full((2, 120), spec.t_base)
        gdp = np.cumprod(np.full((2, 120 - 40), 1.02), axis=1)
        worst = max(worst, float(np.max(np.abs(M.log_gap(spec, temps, 40, gdp, "numpy")))))
    return worst == 0.0, f"max |gap| = {worst!r}"


def _optima():
    out = {}
    for spec in M.all_specs():
        try:
            out[spec.study] = round(M.optimum_of(spec), 6)
        except Exception as exc:  # families without a level optimum
            out[spec.study] = type(exc).__name__
    return True, repr(out)


def _two_good(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        eta = float(rng.uniform(0.2, 3.0))
        if abs(eta - 1.0) < 1e-3:
            continue
        rho = float(rng.uniform(0.0, 0.03))
        d = GrowthDecomposition(*rng.normal(0.0, 0.02, 3))
        b10 = two_good_rate(d, RamseyParams(rho, eta, alpha_for_b12(eta)), "B10")
        b12 = two_good_rate(d, RamseyParams(rho, eta), "B12")
        b10_absent = two_good_rate(d, RamseyParams(rho, eta, 0.0), "B10")
        b13 = two_good_rate(d, RamseyParams(rho, eta), "B13")
        worst = max(worst, abs(float(b10 - b12)), abs(float(b10_absent - b13)))
    return worst < 1e-12, f"max deviation {worst!r}"


def _amazon(n=200, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        s = AmazonState(0.0, float(rng.triangular(10, 50, 250)))
        total = 0.0
        for _ in range(300):
            s, e = amazon_step(s, 5.0)
            total += e
        worst = max(worst, abs(total - s.budget) / s.budget)
    return worst < 1e-9, f"max relative release error {worst!r}"


def _quantile(n=300, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 30))
        x, y = rng.uniform(0.1, 2.0, m), rng.normal(0, 1, m)
        tau = float(rng.uniform(0.05, 0.95))
        worst = max(worst, abs(NM.fit_quantile_slope(x, y, tau) - NM.fit_quantile_slope_bruteforce(x, y, tau)))
    return worst <= 1e-12, f"max |exact - brute force| {worst!r}"


def _pairing():
    sizes = group_sizes(2237, 4)
    return sizes == [560, 559, 559, 559], repr(sizes)


CHECKS = {
    "zero_anomaly_identity": _zero_anomaly,
    "optimum_anchors": _optima,
    "two_good_reduction": _two_good,
    "amazon_conservation": _amazon,
    "quantile_slope_exact": _quantile,
    "pairing_group_sizes": _pairing,
}


def run_checks() -> list[tuple[str, bool, str]]:
    return [(name, *fn()) for name, fn in CHECKS.items()]
