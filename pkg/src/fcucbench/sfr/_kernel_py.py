"""Pure-Python SFR integration kernel.

Fallback used when the compiled extension is unavailable.  Scalar loops
mirror the compiled kernel operation-for-operation so both produce the
same trajectories.
"""

from __future__ import annotations


def run_sfr(h_sys, f0, d_frac, demand, p_lost,
            gain, tg, rho, sat_lo, sat_hi,
            trig_delta, frac, relay, breaker_delay,
            dt, n_steps, use_rk4):
    """Integrate the post-outage swing/governor dynamics with staged relays.

    Returns (status, df_hist, pgov_hist, shed_hist, ev_time, ev_stage,
    ev_mw); status 0 is success, 1 flags an unstable step (df_hist is
    truncated at the offending step).
    """
    n = len(gain)
    n_stages = len(trig_delta)
    gain = list(map(float, gain))
    tg = list(map(float, tg))
    sat_lo = list(map(float, sat_lo))
    sat_hi = list(map(float, sat_hi))
    trig_delta = list(map(float, trig_delta))
    frac = list(map(float, frac))
    relay = list(map(float, relay))

    x1 = [0.0] * n
    x2 = [0.0] * n
    df = 0.0
    shed = 0.0

    df_hist = [0.0] * (n_steps + 1)
    pgov_hist = [0.0] * (n_steps + 1)
    shed_hist = [0.0] * (n_steps + 1)
    ev_time, ev_stage, ev_mw = [], [], []

    timers = [0.0] * n_stages
    pending = [-1.0] * n_stages  # execution time once armed
    tripped = [False] * n_stages

    inv2h = f0 / (2.0 * h_sys)

    def total_gov(a2):
        tot = 0.0
        for i in range(n):
            out = gain[i] * a2[i]
            if out > sat_hi[i]:
                out = sat_hi[i]
            elif out < sat_lo[i]:
                out = sat_lo[i]
            tot += out
        return tot

    def deriv(fdev, a1, a2, shed_now, d1, d2):
        e = -fdev / f0
        for i in range(n):
            d1[i] = (e - a1[i]) / tg[i]
            d2[i] = (a1[i] - a2[i]) / (rho * tg[i])
        pg = total_gov(a2)
        return inv2h * (pg - (p_lost - shed_now)
                        - d_frac * (demand - shed_now) * fdev)

    k1_1 = [0.0] * n
    k1_2 = [0.0] * n
    k2_1 = [0.0] * n
    k2_2 = [0.0] * n
    k3_1 = [0.0] * n
    k3_2 = [0.0] * n
    k4_1 = [0.0] * n
    k4_2 = [0.0] * n
    t1 = [0.0] * n
    t2 = [0.0] * n

    for step in range(n_steps):
        t_now = step * dt

        # execute pending shed actions due at or before this instant
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
            kf1 = deriv(df, x1, x2, shed, k1_1, k1_2)
            for i in range(n):
                t1[i] = x1[i] + 0.5 * dt * k1_1[i]
                t2[i] = x2[i] + 0.5 * dt * k1_2[i]
            kf2 = deriv(df + 0.5 * dt * kf1, t1, t2, shed, k2_1, k2_2)
            for i in range(n):
                t1[i] = x1[i] + 0.5 * dt * k2_1[i]
                t2[i] = x2[i] + 0.5 * dt * k2_2[i]
            kf3 = deriv(df + 0.5 * dt * kf2, t1, t2, shed, k3_1, k3_2)
            for i in range(n):
                t1[i] = x1[i] + dt * k3_1[i]
                t2[i] = x2[i] + dt * k3_2[i]
            kf4 = deriv(df + dt * kf3, t1, t2, shed, k4_1, k4_2)
            df_new = df + (dt / 6.0) * (kf1 + 2.0 * kf2 + 2.0 * kf3 + kf4)
            for i in range(n):
                x1[i] += (dt / 6.0) * (k1_1[i] + 2.0 * k2_1[i]
                                       + 2.0 * k3_1[i] + k4_1[i])
                x2[i] += (dt / 6.0) * (k1_2[i] + 2.0 * k2_2[i]
                                       + 2.0 * k3_2[i] + k4_2[i])
        else:
            kf1 = deriv(df, x1, x2, shed, k1_1, k1_2)
            df_new = df + dt * kf1
            for i in range(n):
                x1[i] += dt * k1_1[i]
                x2[i] += dt * k1_2[i]

        if abs(df_new - df) > 1.0:
            return (1, df_hist[:step + 1], pgov_hist[:step + 1],
                    shed_hist[:step + 1], ev_time, ev_stage, ev_mw)
        df = df_new
        df_hist[step + 1] = df
        pgov_hist[step + 1] = total_gov(x2)
        shed_hist[step + 1] = shed

        # relay timers sampled on the post-step frequency
        t_next = (step + 1) * dt
        for s in range(n_stages):
            if tripped[s] or pending[s] >= 0.0:
                continue
            if df <= trig_delta[s]:
                timers[s] += dt
                if timers[s] >= relay[s] - 1e-12:
                    pending[s] = t_next + breaker_delay
            else:
                timers[s] = 0.0

    return (0, df_hist, pgov_hist, shed_hist, ev_time, ev_stage, ev_mw)
