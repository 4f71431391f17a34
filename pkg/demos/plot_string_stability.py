"""
Step response down the platoon
==============================

The leader steps from 2 to 3 m/s. The amplification ratio compares each
follower's peak speed deviation with its predecessor's; values above 1 mean
the disturbance grows along the string.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from platoonsim.metrics import amplification_ratio
from platoonsim.scenario import run_scenario, step_profile, theoretical_config

OUT = Path("demo_output")
OUT.mkdir(exist_ok=True)

v0, v1, t_step, T = 2.0, 3.0, 20.0, 60.0
res = run_scenario(theoretical_config(duration=T, leader_profile=step_profile(v0, v1, t_step, T)))

A = amplification_ratio(res.trace, (t_step, T), v0)
for vid, a in enumerate(A, start=2):
    print(f"A_{vid} = {a:.4f}")
print("string stable" if max(A) <= 1 else "not string stable")

############################################################
# Speed overshoot after the step

sel = (res.trace.t > t_step - 2) & (res.trace.t < t_step + 15)
fig, ax = plt.subplots(figsize=(7, 3.5))
for vid in range(1, res.trace.n_vehicles + 1):
    ax.plot(res.trace.t[sel], res.trace.v[sel, vid - 1], lw=1, label=f"vehicle {vid}")
ax.set_xlabel("time [s]")
ax.set_ylabel("speed [m/s]")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "step_response.png", dpi=120)
