"""Stochastic Ramsey discounting and its two-good extension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import CalibrationError, ConfigError

TWO_GOOD_MODES = ("B10", "B12", "B13")


@dataclass(frozen=True)
class RamseyParams:
    rho: float = 0.0041
    eta: float = 1.02
    alpha: float = 0.0

    def __post_init__(self):
        problems = []
        if not self.eta > 0:
            problems.append(f"eta must be > 0, got {self.eta}")
        if not self.rho >= 0:
            problems.append(f"rho must be >= 0, got {self.rho}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class GrowthDecomposition:
    """Exogenous market growth and the drags from market and nonmarket damages."""

    g0: np.ndarray
    dgC: np.ndarray
    dgE: np.ndarray


def ramsey_rate(g, p: RamseyParams) -> np.ndarray:
    return p.rho + p.eta * np.asarray(g, dtype=float)


def alpha_for_b12(eta: float) -> float:
    """Nonmarket weight under which the two-good rate collapses to a single
    growth rate net of both damage drags."""
    if eta == 1.0:
        raise ConfigError(
            "B12 needs alpha = eta/(eta-1), undefined at eta = 1; use B13, which coincides there"
        )
    return eta / (eta - 1.0)


def two_good_rate(d: GrowthDecomposition, p: RamseyParams, mode: str) -> np.ndarray:
    g0, dgC, dgE = (np.asarray(v, dtype=float) for v in (d.g0, d.dgC, d.dgE))
    if mode == "B10":
        # nonmarket baseline growth is zero, so its realized growth is -dgE
        return p.rho + p.eta * (g0 - dgC) + p.alpha * (p.eta - 1.0) * (-dgE)
    if mode == "B12":
        alpha_for_b12(p.eta)
        return p.rho + p.eta * (g0 - dgC - dgE)
    if mode == "B13":
        return p.rho + p.eta * (g0 - dgC)
    raise ConfigError(f"unknown two-good mode {mode!r}; expected one of {TWO_GOOD_MODES}")


def discount_factors(rates) -> np.ndarray:
    """DF(0) = 1 and DF(t) = exp(-sum_{s=1..t} r_s), along the last axis.

    `rates` holds r_1..r_T, so the result is one longer.
    """
    r = np.asarray(rates, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("discount rates must be finite")
    cum = np.cumsum(r, axis=-1)
    zero = np.zeros(r.shape[:-1] + (1,))
    return np.exp(-np.concatenate([zero, cum], axis=-1))


def certainty_equivalent_rate(factors) -> np.ndarray:
    """R(t) = -ln(mean_i DF_i(t)) / t for t = 1..T; R(0) is omitted.

    `factors` is (trials, T+1) with DF(0) in column 0, or a single path.
    """
    df = np.atleast_2d(np.asarray(factors, dtype=float))
    t = np.arange(1, df.shape[1])
    return -np.log(df[:, 1:].mean(axis=0)) / t


def _ce_excess(cum_growth: np.ndarray, eta: float) -> np.ndarray:
    """Q(t) = -(1/t) ln mean_i exp(-eta * S_i(t)), the growth part of R(t)."""
    n = cum_growth.shape[0]
    t = np.arange(1, cum_growth.shape[1] + 1)
    return -(logsumexp(-eta * cum_growth, axis=0) - np.log(n)) / t


@dataclass(frozen=True)
class CalibrationResult:
    params: RamseyParams
    near_residual: float
    far_residual: float
    flat: bool


def calibrate(
    growth,
    target_near: float = 0.02,
    target_far: float = 0.016,
    far_horizon: int = 200,
    near_years: int = 10,
    eta_default: float = 1.02,
    eta_bracket: tuple = (0.05, 6.0),
    tol: float = 1e-8,
) -> CalibrationResult:
    """Fit (rho, eta) so the average CE rate over the first `near_years` equals
    `target_near` and the CE rate at `far_horizon` equals `target_far`.

    For a given eta the near condition pins rho in closed form, so only eta is
    root-found. `growth` is (trials, years) per-capita growth starting one year
    after the base year.
    """
    g = np.atleast_2d(np.asarray(growth, dtype=float))
    if g.shape[1] < max(far_horizon, near_years):
        raise CalibrationError(
            f"growth ensemble covers {g.shape[1]} years, need {max(far_horizon, near_years)}"
        )
    if not np.all(np.isfinite(g)):
        raise CalibrationError("growth ensemble has non-finite entries")
    cum = np.cumsum(g[:, :far_horizon], axis=1)

    def rho_of(eta):
        return target_near - _ce_excess(cum[:, :near_years], eta).mean()

    def far_gap(eta):
        return rho_of(eta) + _ce_excess(cum, eta)[-1] - target_far

    flat = bool(np.all(np.ptp(cum, axis=0) == 0.0))
    if flat:
        # every trial shares one path: the far condition carries no information
        eta = eta_default
    else:
        lo, hi = eta_bracket
        f_lo, f_hi = far_gap(lo), far_gap(hi)
        if np.sign(f_lo) == np.sign(f_hi):
            raise CalibrationError(
                "far-horizon condition has no sign change over the eta bracket",
                {"eta_bracket": (lo, hi), "far_gap": (f_lo, f_hi),
                 "target_near": target_near, "target_far": target_far},
            )
        eta = brentq(far_gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)

    rho = rho_of(eta)
    near_res = rho + _ce_excess(cum[:, :near_years], eta).mean() - target_near
    far_res = 0.0 if flat else far_gap(eta)
    if abs(near_res) > tol or abs(far_res) > tol:
        raise CalibrationError("calibration residual above tolerance",
                               {"eta": eta, "rho": rho, "near": near_res, "far": far_res})
    if rho < 0:
        raise CalibrationError(
            "calibrated rho is negative; targets are inconsistent with the ensemble",
            {"eta": eta, "rho": rho},
        )
    return CalibrationResult(RamseyParams(rho=float(rho), eta=float(eta)), float(near_res), float(far_res), flat)


def mwtp_nonmarket(c, e, alpha: float):
    """Marginal willingness to pay for the nonmarket good, alpha * C / E."""
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise ValueError("nonmarket good level must be > 0")
    return alpha * np.asarray(c, dtype=float) / e
