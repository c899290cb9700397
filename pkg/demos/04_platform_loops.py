"""
Holding the platform level
==========================

A fast PID on the platform moment actuator rejects a step heeling moment; the
slow ballast loop removes the mean thrust heel over several minutes.
"""

# %%
import numpy as np

from fowtctl import controller as ctl, config, study
from fowtctl.simulation import SimConfig, integrate, static_ballast, trim_state
from fowtctl.tuning import platform_pid_matrix, tune_ballast, tune_platform_pid
from fowtctl.wind import constant

cfg = config.ToolkitConfig()
plant = study.plant_from(cfg)
pf = plant.platform

gains = tune_platform_pid(pf, bandwidth=1.0, zeta=0.7)
print(f"PID gains: kp {gains.pid_kp:.3g}, ki {gains.pid_ki:.3g}, kd {gains.pid_kd:.3g}")
print("closed-loop poles:", np.round(np.linalg.eigvals(platform_pid_matrix(pf, gains)), 4))

# %% Step heeling moment of 50 MN m on a level, trimmed platform at 16 m/s
v, step = 16.0, 5e7
b = static_ballast(plant, v)
x0 = trim_state(plant, v, b)
x0[6] = b + step
sim = SimConfig(60.0, 0.0, initial="given")
no_pid = study.build_controller("Detune+Comp", plant, cfg)
pid = ctl.with_flags(study.build_controller("Detune+Comp+Ptfm", plant, cfg), ballast_mode="off")
for label, c in (("pitch loop only", no_pid), ("with platform PID", pid)):
    res = integrate(plant, c, [constant(v, 60.0)], sim, x0=x0, ballast=b + step, channels=("phi", "tau_p"))
    print(f"{label:18s}: peak heel {np.degrees(np.abs(res['phi'][0]).max()):.3f}°, "
          f"peak actuator moment {np.abs(res['tau_p'][0]).max() / 1e6:.1f} MN m")

# %% Ballast integral loop
for settle in (300.0, 600.0, 1200.0):
    ki, cutoff = tune_ballast(pf, settle)
    print(f"settle {settle:5.0f} s: ballast gain {ki:.3g} N m/(rad s), heel filter {cutoff:.4f} rad/s")
