"""Recursive damage-family kernels (numba loops and numpy fallbacks).

Only families with a genuine year-to-year recursion live here; the others are
closed-form array expressions in `damages.macro`.
"""

import math

import numpy as np

from .._jit import lazy_njit, numba

prange = numba.prange if numba is not None else range


def _convergence_loop(shock, lam, out):
    n, T = shock.shape
    for i in prange(n):
        gap = 0.0
        for t in range(T):
            gap = lam * gap + shock[i, t]
            out[i, t] = gap


def convergence_numpy(shock, lam, out):
    gap = np.zeros(shock.shape[0])
    for t in range(shock.shape[1]):
        gap = lam * gap + shock[:, t]
        out[:, t] = gap


convergence_numba = lazy_njit(_convergence_loop, parallel=True)


def _ardl_loop(driver, start, bpos, bneg, ar, out):
    """Growth = distributed lag of the split driver + AR terms; gap = running sum.

    `driver` covers history; lags reaching before `start` read history, and
    growth before `start` is zero.
    """
    n = driver.shape[0]
    T = out.shape[1]
    p = bpos.shape[0]
    q = ar.shape[0]
    for i in prange(n):
        g = np.zeros(T)
        gap = 0.0
        for t in range(T):
            tt = start + t
            acc = 0.0
            for l in range(p):
                d = driver[i, tt - l]
                if d > 0.0:
                    acc += bpos[l] * d
                else:
                    acc += bneg[l] * d
            for k in range(q):
                if t - 1 - k >= 0:
                    acc += ar[k] * g[t - 1 - k]
            g[t] = acc
            gap += acc
            out[i, t] = gap


def ardl_numpy(driver, start, bpos, bneg, ar, out):
    n = driver.shape[0]
    T = out.shape[1]
    p = bpos.shape[0]
    q = ar.shape[0]
    g = np.zeros((n, T))
    gap = np.zeros(n)
    for t in range(T):
        tt = start + t
        acc = np.zeros(n)
        for l in range(p):
            d = driver[:, tt - l]
            acc = acc + np.where(d > 0.0, bpos[l] * d, bneg[l] * d)
        for k in range(q):
            if t - 1 - k >= 0:
                acc = acc + ar[k] * g[:, t - 1 - k]
        g[:, t] = acc
        gap = gap + acc
        out[:, t] = gap


ardl_numba = lazy_njit(_ardl_loop, parallel=True)


def _solow_loop(tfp_shock, gdp, carry, s, alpha, delta, k0_growth, out):
    """TFP gap x_t = carry * x_{t-1} + shock_t; capital ratio kappa = K/K_cf.

    Counterfactual capital follows K' = s*Y_cf + (1-delta)*K from scenario GDP,
    starting on its balanced-growth ratio. ln GDP gap = x + alpha * ln kappa.
    """
    n, T = tfp_shock.shape
    for i in prange(n):
        k_cf = s * gdp[i, 0] / (k0_growth[i] + delta)
        x = 0.0
        kappa = 1.0
        for t in range(T):
            x = carry * x + tfp_shock[i, t]
            out[i, t] = x + alpha * math.log(kappa)
            r = gdp[i, t] / k_cf
            sr = s * r
            kappa = (sr * math.exp(x) * kappa ** alpha + (1.0 - delta) * kappa) / (sr + 1.0 - delta)
            k_cf = s * gdp[i, t] + (1.0 - delta) * k_cf


def solow_numpy(tfp_shock, gdp, carry, s, alpha, delta, k0_growth, out):
    n, T = tfp_shock.shape
    k_cf = s * gdp[:, 0] / (k0_growth + delta)
    x = np.zeros(n)
    kappa = np.ones(n)
    for t in range(T):
        x = carry * x + tfp_shock[:, t]
        out[:, t] = x + alpha * np.log(kappa)
        sr = s * (gdp[:, t] / k_cf)
        kappa = (sr * np.exp(x) * kappa ** alpha + (1.0 - delta) * kappa) / (sr + 1.0 - delta)
        k_cf = s * gdp[:, t] + (1.0 - delta) * k_cf


solow_numba = lazy_njit(_solow_loop, parallel=True)
