# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled SFR integration kernel.

Hot loop of the frequency simulator; mirrors _kernel_py operation for
operation so the two kernels are interchangeable.
"""

from libc.math cimport fabs
from libc.stdlib cimport calloc, free


cdef double _total_gov(int n, double* gain, double* x2,
                       double* sat_lo, double* sat_hi) noexcept nogil:
    cdef double tot = 0.0
    cdef double out
    cdef int i
    for i in range(n):
        out = gain[i] * x2[i]
        if out > sat_hi[i]:
            out = sat_hi[i]
        elif out < sat_lo[i]:
            out = sat_lo[i]
        tot += out
    return tot


cdef double _deriv(double fdev, double* a1, double* a2, double shed_now,
                   double* d1, double* d2,
                   int n, double f0, double inv2h, double d_frac,
                   double demand, double p_lost,
                   double* gain, double* tg, double rho,
                   double* sat_lo, double* sat_hi) noexcept nogil:
    cdef double e = -fdev / f0
    cdef int i
    for i in range(n):
        d1[i] = (e - a1[i]) / tg[i]
        d2[i] = (a1[i] - a2[i]) / (rho * tg[i])
    cdef double pg = _total_gov(n, gain, a2, sat_lo, sat_hi)
    return inv2h * (pg - (p_lost - shed_now)
                    - d_frac * (demand - shed_now) * fdev)


def run_sfr(double h_sys, double f0, double d_frac, double demand,
            double p_lost,
            gain_in, tg_in, double rho, sat_lo_in, sat_hi_in,
            trig_in, frac_in, relay_in, double breaker_delay,
            double dt, int n_steps, bint use_rk4):
    """See _kernel_py.run_sfr; identical contract."""
    cdef int n = len(gain_in)
    cdef int n_stages = len(trig_in)
    cdef int i, s, step
    cdef double df = 0.0, shed = 0.0, df_new, t_now, t_next, amount
    cdef double kf1, kf2, kf3, kf4
    cdef double inv2h = f0 / (2.0 * h_sys)

    # one arena for all per-unit work arrays
    cdef double* buf = <double*> calloc(15 * n + 4 * n_stages, sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* gain = buf
    cdef double* tg = buf + n
    cdef double* sat_lo = buf + 2 * n
    cdef double* sat_hi = buf + 3 * n
    cdef double* x1 = buf + 4 * n
    cdef double* x2 = buf + 5 * n
    cdef double* k1_1 = buf + 6 * n
    cdef double* k1_2 = buf + 7 * n
    cdef double* k2_1 = buf + 8 * n
    cdef double* k2_2 = buf + 9 * n
    cdef double* k3_1 = buf + 10 * n
    cdef double* k3_2 = buf + 11 * n
    cdef double* k4_1 = buf + 12 * n
    cdef double* k4_2 = buf + 13 * n
    cdef double* t1 = buf + 14 * n
    # t2 shares the stage arena tail; keep explicit blocks instead
    cdef double* trig = buf + 15 * n
    cdef double* frac = buf + 15 * n + n_stages
    cdef double* relay = buf + 15 * n + 2 * n_stages
    cdef double* timers = buf + 15 * n + 3 * n_stages
    cdef double* t2 = <double*> calloc(n if n > 0 else 1, sizeof(double))
    cdef double* pending = <double*> calloc(n_stages if n_stages > 0 else 1,
                                            sizeof(double))
    if t2 == NULL or pending == NULL:
        free(buf)
        if t2 != NULL:
            free(t2)
        if pending != NULL:
            free(pending)
        raise MemoryError()

    for i in range(n):
        gain[i] = gain_in[i]
        tg[i] = tg_in[i]
        sat_lo[i] = sat_lo_in[i]
        sat_hi[i] = sat_hi_in[i]
    for s in range(n_stages):
        trig[s] = trig_in[s]
        frac[s] = frac_in[s]
        relay[s] = relay_in[s]
        pending[s] = -1.0

    df_hist = [0.0] * (n_steps + 1)
    pgov_hist = [0.0] * (n_steps + 1)
    shed_hist = [0.0] * (n_steps + 1)
    ev_time, ev_stage, ev_mw = [], [], []
    tripped = [False] * n_stages
    cdef int status = 0
    cdef int last_step = n_steps

    try:
        for step in range(n_steps):
            t_now = step * dt

            for s in range(n_stages):
                if pending[s] >= 0.0 and pending[s] <= t_now + 1e-12:
                    amount = frac[s] * (demand - shed)
                    shed += amount
                    ev_time.append(pending[s])
                    ev_stage.append(s)
                    ev_mw.append(amount)
                    pending[s] = -1.0
                    tripped[s] = True

            if use_rk4:
                kf1 = _deriv(df, x1, x2, shed, k1_1, k1_2, n, f0, inv2h,
                             d_frac, demand, p_lost, gain, tg, rho,
                             sat_lo, sat_hi)
                for i in range(n):
                    t1[i] = x1[i] + 0.5 * dt * k1_1[i]
                    t2[i] = x2[i] + 0.5 * dt * k1_2[i]
                kf2 = _deriv(df + 0.5 * dt * kf1, t1, t2, shed, k2_1, k2_2,
                             n, f0, inv2h, d_frac, demand, p_lost, gain, tg,
                             rho, sat_lo, sat_hi)
                for i in range(n):
                    t1[i] = x1[i] + 0.5 * dt * k2_1[i]
                    t2[i] = x2[i] + 0.5 * dt * k2_2[i]
                kf3 = _deriv(df + 0.5 * dt * kf2, t1, t2, shed, k3_1, k3_2,
                             n, f0, inv2h, d_frac, demand, p_lost, gain, tg,
                             rho, sat_lo, sat_hi)
                for i in range(n):
                    t1[i] = x1[i] + dt * k3_1[i]
                    t2[i] = x2[i] + dt * k3_2[i]
                kf4 = _deriv(df + dt * kf3, t1, t2, shed, k4_1, k4_2,
                             n, f0, inv2h, d_frac, demand, p_lost, gain, tg,
                             rho, sat_lo, sat_hi)
                df_new = df + (dt / 6.0) * (kf1 + 2.0 * kf2 + 2.0 * kf3 + kf4)
                for i in range(n):
                    x1[i] += (dt / 6.0) * (k1_1[i] + 2.0 * k2_1[i]
                                           + 2.0 * k3_1[i] + k4_1[i])
                    x2[i] += (dt / 6.0) * (k1_2[i] + 2.0 * k2_2[i]
                                           + 2.0 * k3_2[i] + k4_2[i])
            else:
                kf1 = _deriv(df, x1, x2, shed, k1_1, k1_2, n, f0, inv2h,
                             d_frac, demand, p_lost, gain, tg, rho,
                             sat_lo, sat_hi)
                df_new = df + dt * kf1
                for i in range(n):
                    x1[i] += dt * k1_1[i]
                    x2[i] += dt * k1_2[i]

            if fabs(df_new - df) > 1.0:
                status = 1
                last_step = step
                break
            df = df_new
            df_hist[step + 1] = df
            pgov_hist[step + 1] = _total_gov(n, gain, x2, sat_lo, sat_hi)
            shed_hist[step + 1] = shed

            t_next = (step + 1) * dt
            for s in range(n_stages):
                if tripped[s] or pending[s] >= 0.0:
                    continue
                if df <= trig[s]:
                    timers[s] += dt
                    if timers[s] >= relay[s] - 1e-12:
                        pending[s] = t_next + breaker_delay
                else:
                    timers[s] = 0.0
    finally:
        free(buf)
        free(t2)
        free(pending)

    if status == 1:
        return (1, df_hist[:last_step + 1], pgov_hist[:last_step + 1],
                shed_hist[:last_step + 1], ev_time, ev_stage, ev_mw)
    return (0, df_hist, pgov_hist, shed_hist, ev_time, ev_stage, ev_mw)
