"""Regenerate the shipped sample scenario and profiles.

Eleven diesel units on a 50 Hz island; cost curves are quadratic fits
sampled at three points with smaller units priced steeper, so merit
order is nontrivial.  Run from the repository root:

    python3 tools/make_sample_data.py
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "src", "fcucbench", "data")

# p_max, p_min, m_base, h, k
UNITS = [
    ("1", 3.82, 2.35, 5.4, 1.75, 20.0),
    ("2", 3.82, 2.35, 5.4, 1.75, 20.0),
    ("3", 3.82, 2.35, 5.4, 1.75, 20.0),
    ("4", 4.3, 2.82, 6.3, 1.73, 20.0),
    ("5", 6.7, 3.3, 9.4, 2.16, 20.0),
    ("6", 6.7, 3.3, 9.6, 1.88, 20.0),
    ("7", 11.2, 6.63, 15.75, 2.1, 20.0),
    ("8", 11.5, 6.63, 14.5, 2.1, 20.0),
    ("9", 11.5, 6.63, 14.5, 2.1, 20.0),
    ("10", 11.5, 6.63, 14.5, 2.1, 20.0),
    ("11", 21.0, 4.85, 26.82, 6.5, 21.25),
]

# no-load EUR/h, marginal EUR/MWh, quadratic EUR/MW^2h, startup EUR,
# min up/down h
COST = {
    "1": (35.0, 210.0, 1.5, 180.0, 2, 2),
    "2": (35.0, 210.0, 1.5, 180.0, 2, 2),
    "3": (35.0, 210.0, 1.5, 180.0, 2, 2),
    "4": (40.0, 200.0, 1.2, 200.0, 2, 2),
    "5": (55.0, 190.0, 0.9, 280.0, 2, 2),
    "6": (55.0, 190.0, 0.9, 280.0, 2, 2),
    "7": (80.0, 175.0, 0.6, 450.0, 3, 3),
    "8": (80.0, 175.0, 0.6, 450.0, 3, 3),
    "9": (80.0, 175.0, 0.6, 450.0, 3, 3),
    "10": (80.0, 175.0, 0.6, 450.0, 3, 3),
    "11": (120.0, 155.0, 0.5, 700.0, 4, 4),
}

T_GOV = 2.0
FOR_RATE = 0.02

DEMAND = [44.0, 41.0, 39.0, 38.0, 38.5, 40.0,
          45.0, 51.0, 57.0, 61.0, 63.5, 65.0,
          64.0, 62.5, 61.5, 62.0, 64.0, 66.5,
          68.0, 67.0, 63.0, 56.0, 49.0, 45.0]
WIND = [3.2, 3.5, 3.8, 4.0, 3.6, 3.0, 2.6, 2.2, 2.0, 1.8, 2.0, 2.3,
        2.5, 2.8, 3.0, 3.2, 3.0, 2.7, 2.4, 2.2, 2.5, 2.8, 3.0, 3.1]
SOLAR = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 1.2, 2.6, 4.2, 5.6, 6.6, 7.0,
         6.9, 6.3, 5.2, 3.8, 2.2, 0.9, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]

UFLS = {
    "breaker_delay_s": 0.25,
    "stages": [
        {"trigger_hz": 49.0, "shed_fraction": 0.10, "relay_delay_s": 0.30},
        {"trigger_hz": 48.8, "shed_fraction": 0.10, "relay_delay_s": 0.30},
        {"trigger_hz": 48.6, "shed_fraction": 0.15, "relay_delay_s": 0.30},
        {"trigger_hz": 48.4, "shed_fraction": 0.20, "relay_delay_s": 0.30},
    ],
}

SYSTEM = {
    "f0_hz": 50.0,
    "s_base_mva": 100.0,
    "load_damping_per_hz": 0.01,
    "reserve_delivery_time_s": 10.0,
    "rocof_limit_hz_per_s": 2.5,
    "qss_limit_hz": 0.5,
    "nadir_limit_hz": 2.5,
    "ufls_cost_eur_per_mw": 20000.0,
}


def cost_points(p_min, p_max, nl, mc, quad):
    def c(p):
        return round(nl + mc * p + quad * p * p, 2)
    mid = round((p_min + p_max) / 2.0, 2)
    return [[p_min, c(p_min)], [mid, c(mid)], [p_max, c(p_max)]]


def main():
    gens = []
    for uid, p_max, p_min, m_base, h, k in UNITS:
        nl, mc, quad, suc, ut, dt = COST[uid]
        gens.append({
            "id": uid,
            "p_max_mw": p_max,
            "p_min_mw": p_min,
            "m_base_mva": m_base,
            "inertia_h_s": h,
            "gov_gain_pu": k,
            "gov_time_s": T_GOV,
            "ramp_up_mw_per_h": p_max,
            "ramp_down_mw_per_h": p_max,
            "min_up_h": ut,
            "min_down_h": dt,
            "forced_outage_rate": FOR_RATE,
            "cost_points_mw_eur": cost_points(p_min, p_max, nl, mc, quad),
            "startup_cost_eur": suc,
        })
    doc = {
        "system": SYSTEM,
        "generators": gens,
        "ufls": UFLS,
        "profiles_csv": "island11_profiles.csv",
    }
    os.makedirs(DATA, exist_ok=True)
    with open(os.path.join(DATA, "island11.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(os.path.join(DATA, "island11_profiles.csv"), "w") as f:
        f.write("hour,demand_mw,wind_mw,solar_mw\n")
        for i, (d, w, s) in enumerate(zip(DEMAND, WIND, SOLAR), start=1):
            f.write(f"{i},{d:.2f},{w:.2f},{s:.2f}\n")
    print("wrote", os.path.join(DATA, "island11.json"))


if __name__ == "__main__":
    main()
