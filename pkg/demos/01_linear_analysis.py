"""
Where does the speed loop become non-minimum phase?
===================================================

Trim the turbine at each whole wind speed above rated, linearize, and compare the
closed-form right-half-plane-zero test with zeros computed from the state space.
Then sweep the torque share of platform-rate compensation and watch the zero leave.
"""

# %%
import numpy as np

from fowtctl.fowt_model import PlatformParams
from fowtctl.linearization import (OMEGA, PITCH, build_state_space, find_operating_point,
                                   nmpz_boundary, nmpz_compensated, reference_speeds,
                                   transmission_zeros)
from fowtctl.rotor_aero import RotorGeometry, build_surrogate_surface

geom = RotorGeometry()
surface = build_surrogate_surface()
platform = PlatformParams()
print(f"platform natural frequency {platform.natural_frequency:.3f} rad/s, "
      f"damping ratio {platform.damping_ratio:.3f}")

# %% Trim points and the pitch-to-speed zeros
print("\n v [m/s]  beta [deg]  heel [deg]  predicate  rightmost zero")
ops = []
for v in reference_speeds():
    op = find_operating_point(geom, surface, platform, v)
    ops.append(op)
    model = build_state_space(op, geom, platform)
    z = transmission_zeros(model, PITCH, OMEGA)
    print(f"{v:7.0f}  {np.degrees(op.beta_bar):10.2f}  {np.degrees(op.phi_bar):10.2f}  "
          f"{str(model.nmpz):>9s}  {z.real.max():+.4f}")

print(f"\nright-half-plane zero present up to {nmpz_boundary(ops, platform):g} m/s")

# %% How much torque compensation removes the zero?
# fraction of full compensation routed through generator torque
grid = np.linspace(0, 1, 21)
print("\n v [m/s]  smallest torque share that removes the zero")
for op in ops[:4]:
    needed = next((m for m in grid if not nmpz_compensated(op, platform, m)), None)
    print(f"{op.v_bar:7.0f}  {needed:.2f}")

# %% Extra hydrodynamic damping moves the boundary down
for scale in (1.0, 2.0, 4.0):
    pf = PlatformParams(damping=scale * platform.damping)
    b = nmpz_boundary(ops, pf)
    print(f"damping x{scale:g}: boundary {'none' if b is None else f'{b:g} m/s'}")
