"""
Detuning, scheduling and dual compensation
==========================================

PI gains placed on the rigid-platform speed loop look fine on paper. Closing the
loop on the full linear model (platform included) shows which ones survive.
"""

# %%
import numpy as np

from fowtctl.fowt_model import PlatformParams
from fowtctl.linearization import (build_state_space, find_operating_point, reference_speeds,
                                   spectral_abscissa, tuning_speeds)
from fowtctl.rotor_aero import RotorGeometry, build_surrogate_surface
from fowtctl.tuning import (BASELINE_SPEC, TransientSpec, build_gain_schedule, closed_loop_matrix,
                            dual_split, pi_gains, torque_comp_gain)

geom = RotorGeometry()
surface = build_surrogate_surface()
platform = PlatformParams()
ops = [find_operating_point(geom, surface, platform, v) for v in tuning_speeds(geom)]
ref = [find_operating_point(geom, surface, platform, v) for v in reference_speeds()]

# %% Fixed baseline gains vs the scheduled family
schedules = {
    "baseline": build_gain_schedule(ops, geom, platform, "baseline", "none"),
    "scheduled": build_gain_schedule(ops, geom, platform, "scheduled", "none"),
    "scheduled+dual": build_gain_schedule(ops, geom, platform, "scheduled", "dual"),
}
print(" v [m/s]" + "".join(f"{k:>16s}" for k in schedules))
for op in ref:
    model = build_state_space(op, geom, platform)
    row = []
    for sch in schedules.values():
        kp, ki, kb, kt = sch.lookup(op.beta_bar)
        row.append(spectral_abscissa(closed_loop_matrix(model, kp, ki, kb, kt)))
    print(f"{op.v_bar:7.0f} " + "".join(f"{a:+16.4f}" for a in row))
print("(spectral abscissa; positive means the linear closed loop is unstable)")

# %% Gains at rated-ish wind
kp, ki = pi_gains(ref[0], TransientSpec(*BASELINE_SPEC), geom)
print(f"\nbaseline gains at 12 m/s: kp = {kp:.4f} s, ki = {ki:.4f}")

# %% Dual split: torque takes what the limit allows, blade pitch the rest
kc = torque_comp_gain(geom, 1.2 * geom.rated_gen_torque)
print(f"\ntorque compensation gain {kc:.4g} N m s/rad (fixed across wind speeds)")
for op in ref[::3]:
    mb, mt = dual_split(op, geom, platform)
    print(f"{op.v_bar:5.0f} m/s: pitch share {mb:.3f}, torque share {mt:.3f}")
