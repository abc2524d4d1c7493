"""Fused emulator + feedback time stepping over a batch of trials.

Both implementations follow the same per-year order:

1. add last year's feedback emissions to this year's inputs
2. update carbon pools and CH4/N2O burdens
3. compute forcing and take one explicit two-box step
4. run the Amazon and permafrost state machines on the new GMST; their
   emissions are queued for the following year

The numba kernel loops over trials (parallel across trials); the numpy
version vectorizes across trials and loops over years.
"""

import math

import numpy as np

from .._jit import lazy_njit, numba

_LN2 = math.log(2.0)
C_TO_CO2 = 44.0 / 12.0
C_TO_CH4_MT = 16.0 / 12.0 * 1000.0
_CLOSE = 1e-12

prange = numba.prange if numba is not None else range


def _climate_loop(co2, ch4, n2o, other,
                  a, decay, f2x, tf, cap1, cap2, ox,
                  ch4_eff, n2o_eff, ch4_decay, n2o_decay,
                  c0, gt_per_ppm, ch4_per_ppb, n2o_per_ppb,
                  fb_start,
                  amz_on, amz_u, amz_slope, amz_thr, amz_dur, amz_budget,
                  pf_on, pf_frozen0, pf_thaw, pf_decomp, pf_ch4, pf_passive,
                  gmst, fb_co2, fb_ch4, bad_year):
    n, n_years = co2.shape
    for i in prange(n):
        r0 = 0.0
        r1 = 0.0
        r2 = 0.0
        r3 = 0.0
        m_ch4 = 0.0
        m_n2o = 0.0
        t1 = 0.0
        t2 = 0.0
        q_co2 = 0.0
        q_ch4 = 0.0
        triggered = False
        released = 0.0
        frozen = pf_frozen0[i]
        active = 0.0
        bad_year[i] = -1
        for t in range(n_years):
            e_co2 = co2[i, t] + q_co2
            e_ch4 = ch4[i, t] + q_ch4
            r0 = r0 * decay[i, 0] + a[i, 0] * e_co2
            r1 = r1 * decay[i, 1] + a[i, 1] * e_co2
            r2 = r2 * decay[i, 2] + a[i, 2] * e_co2
            r3 = r3 * decay[i, 3] + a[i, 3] * e_co2
            conc = c0 + (r0 + r1 + r2 + r3) / gt_per_ppm
            m_ch4 = m_ch4 * ch4_decay[i] + e_ch4 / ch4_per_ppb
            m_n2o = m_n2o * n2o_decay[i] + n2o[i, t] / n2o_per_ppb
            if conc > 0.0:
                forcing = (f2x[i] / _LN2 * math.log(conc / c0) + ch4_eff[i] * m_ch4
                           + n2o_eff[i] * m_n2o + other[t])
            else:
                forcing = math.nan
            d1 = (forcing - tf[i] * t1 - ox[i] * (t1 - t2)) / cap1[i]
            d2 = ox[i] * (t1 - t2) / cap2[i]
            t1 = t1 + d1
            t2 = t2 + d2
            gmst[i, t] = t1
            if not math.isfinite(t1):
                bad_year[i] = t
                break

            q_co2 = 0.0
            q_ch4 = 0.0
            if t >= fb_start:
                if amz_on[i]:
                    if not triggered:
                        h = amz_slope[i] * max(0.0, t1 - amz_thr[i])
                        h = min(max(h, 0.0), 1.0)
                        if amz_u[i] < h:
                            triggered = True
                    if triggered and released < amz_budget[i]:
                        rate = amz_budget[i] / amz_dur[i]
                        if released + rate >= amz_budget[i] * (1.0 - _CLOSE):
                            q_co2 += amz_budget[i] - released
                            released = amz_budget[i]
                        else:
                            q_co2 += rate
                            released += rate
                if pf_on[i]:
                    thaw = min(pf_thaw[i] * max(0.0, t1) * frozen, frozen)
                    frozen -= thaw
                    active += (1.0 - pf_passive[i]) * thaw
                    dec = min(pf_decomp[i] * active, active)
                    active -= dec
                    q_co2 += dec * (1.0 - pf_ch4[i]) * C_TO_CO2
                    q_ch4 += dec * pf_ch4[i] * C_TO_CH4_MT
            fb_co2[i, t] = q_co2
            fb_ch4[i, t] = q_ch4


climate_numba = lazy_njit(_climate_loop, parallel=True)


def climate_numpy(co2, ch4, n2o, other,
                  a, decay, f2x, tf, cap1, cap2, ox,
                  ch4_eff, n2o_eff, ch4_decay, n2o_decay,
                  c0, gt_per_ppm, ch4_per_ppb, n2o_per_ppb,
                  fb_start,
                  amz_on, amz_u, amz_slope, amz_thr, amz_dur, amz_budget,
                  pf_on, pf_frozen0, pf_thaw, pf_decomp, pf_ch4, pf_passive,
                  gmst, fb_co2, fb_ch4, bad_year):
    n, n_years = co2.shape
    pools = np.zeros((n, 4))
    m_ch4 = np.zeros(n)
    m_n2o = np.zeros(n)
    t1 = np.zeros(n)
    t2 = np.zeros(n)
    q_co2 = np.zeros(n)
    q_ch4 = np.zeros(n)
    triggered = np.zeros(n, dtype=bool)
    released = np.zeros(n)
    frozen = pf_frozen0.astype(float).copy()
    active = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    bad_year[:] = -1
    scale = f2x / _LN2
    rate = amz_budget / amz_dur
    for t in range(n_years):
        e_co2 = co2[:, t] + q_co2
        e_ch4 = ch4[:, t] + q_ch4
        for k in range(4):
            pools[:, k] = pools[:, k] * decay[:, k] + a[:, k] * e_co2
        conc = c0 + (((pools[:, 0] + pools[:, 1]) + pools[:, 2]) + pools[:, 3]) / gt_per_ppm
        m_ch4 = m_ch4 * ch4_decay + e_ch4 / ch4_per_ppb
        m_n2o = m_n2o * n2o_decay + n2o[:, t] / n2o_per_ppb
        with np.errstate(invalid="ignore", divide="ignore"):
            log_term = np.where(conc > 0.0, np.log(np.where(conc > 0.0, conc, 1.0) / c0), np.nan)
        forcing = scale * log_term + ch4_eff * m_ch4 + n2o_eff * m_n2o + other[t]
        d1 = (forcing - tf * t1 - ox * (t1 - t2)) / cap1
        d2 = ox * (t1 - t2) / cap2
        t1 = t1 + d1
        t2 = t2 + d2
        gmst[alive, t] = t1[alive]
        newly_bad = alive & ~np.isfinite(t1)
        if newly_bad.any():
            bad_year[newly_bad] = t
            alive &= ~newly_bad

        q_co2 = np.zeros(n)
        q_ch4 = np.zeros(n)
        if t >= fb_start:
            h = np.clip(amz_slope * np.maximum(0.0, t1 - amz_thr), 0.0, 1.0)
            triggered |= amz_on & (amz_u < h)
            emitting = triggered & (released < amz_budget)
            last = emitting & (released + rate >= amz_budget * (1.0 - _CLOSE))
            mid = emitting & ~last
            q_co2 = np.where(last, amz_budget - released, np.where(mid, rate, 0.0))
            released = np.where(last, amz_budget, np.where(mid, released + rate, released))

            thaw = np.minimum(pf_thaw * np.maximum(0.0, t1) * frozen, frozen)
            thaw = np.where(pf_on, thaw, 0.0)
            frozen = frozen - thaw
            active = active + (1.0 - pf_passive) * thaw
            dec = np.minimum(pf_decomp * active, active)
            active = active - dec
            q_co2 = q_co2 + np.where(pf_on, dec * (1.0 - pf_ch4) * C_TO_CO2, 0.0)
            q_ch4 = np.where(pf_on, dec * pf_ch4 * C_TO_CH4_MT, 0.0)
        fb_co2[:, t] = q_co2
        fb_ch4[:, t] = q_ch4
        if not alive.any():
            break
