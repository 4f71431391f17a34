"""
Theoretical versus realistic platoon
====================================

Four vehicles drive a start, cruise, S-curve, stop profile. The
theoretical setup uses unicycle vehicles, ideal forwarding and stiff gains.
The realistic one uses Ackermann steering, the ITS-G5 channel, noisy
localization and the softer gains (1, 1) with a 1 s time gap.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from platoonsim.scenario import realistic_config, run_scenario, sweep, theoretical_config

OUT = Path("demo_output")
OUT.mkdir(exist_ok=True)

############################################################
# Same profile and seed for both

real_cfg = realistic_config(duration=60.0, seed=0)
theo_cfg = theoretical_config(duration=60.0, seed=0, leader_profile=real_cfg.leader_profile)
theo, real = sweep([theo_cfg, real_cfg])

for name, res in (("theoretical", theo), ("realistic", real)):
    for f in res.metrics.followers:
        print(f"{name:12s} vehicle {f.vehicle_id}: mean |e_long| {f.mean_abs_e_long:.3f} m, "
              f"cross-track {f.cross_track_rmse:.3f} m")

############################################################
# Trajectories: near-identical in theory, visibly apart with the channel

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, (name, res) in zip(axes, (("theoretical", theo), ("realistic", real))):
    for vid in range(1, res.trace.n_vehicles + 1):
        p = res.trace.path(vid)
        ax.plot(p[:, 0], p[:, 1], lw=1, label=f"vehicle {vid}")
    ax.set_title(name)
    ax.set_aspect("equal", adjustable="datalim")
axes[0].legend(fontsize="small")
fig.tight_layout()
fig.savefig(OUT / "trajectories.png", dpi=120)

############################################################
# Speeds along the platoon

fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
for ax, (name, res) in zip(axes, (("theoretical", theo), ("realistic", real))):
    ax.plot(res.trace.t, res.trace.v, lw=1)
    ax.set_ylabel(f"{name}\nspeed [m/s]")
axes[-1].set_xlabel("time [s]")
fig.tight_layout()
fig.savefig(OUT / "speeds.png", dpi=120)
