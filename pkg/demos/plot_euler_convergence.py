"""
Forward-Euler accuracy of the vehicle models
============================================

Both plants drive a constant-curvature arc for one second. The closed-form
circle is the reference; the terminal error should halve with the step size.
"""

import math

import numpy as np

from platoonsim.dynamics import AckermannCommand, VehicleParams, VehicleState, bicycle_step, unicycle_step

params = VehicleParams(0.32)
# unit-radius circle: tan(delta) = d / R
cmd = AckermannCommand(1.0, math.atan(0.32))

for dt in (1e-3, 5e-4, 2.5e-4, 1e-4):
    s = VehicleState()
    u = VehicleState(v=1.0)
    for _ in range(round(1.0 / dt)):
        s = bicycle_step(s, cmd, params, dt)
        u = unicycle_step(u, 0.0, 0.5, dt)
    e_b = math.hypot(s.x - math.sin(1.0), s.y - (1 - math.cos(1.0)))
    e_u = math.hypot(u.x - 2 * math.sin(0.5), u.y - 2 * (1 - math.cos(0.5)))
    print(f"dt={dt:.0e}  bicycle {e_b:.3e} m  unicycle {e_u:.3e} m")
