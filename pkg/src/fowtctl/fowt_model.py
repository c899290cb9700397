"""Coupled generator-speed and platform-pitch plant with actuator lags.

State vector order (also used for packed arrays in the simulator)::

    theta, omega_g, phi, phi_dot, beta_act, tau_p_act, ballast_act
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .rotor_aero import PerformanceSurface, RotorGeometry, aero_loads

WIND_FLOOR = 0.5


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlatformParams:
    """Rigid platform pitch oscillator about its pitch axis.

    The defaults put the pitch natural frequency at about 0.28 rad/s (22 s
    period) with ~11% of critical hydrodynamic damping; the stiffness gives
    roughly 5 deg of mean heel at rated thrust. With these values the pitch
    to speed channel has right-half-plane zeros from rated up to ~13 m/s.
    """

    inertia: float = 2.5e10
    damping: float = 1.6e9
    restoring: float = 2.0e9
    hub_height: float = 119.0

    def __post_init__(self):
        if not (self.inertia > 0 and self.restoring > 0 and self.hub_height > 0):
            raise ValueError("platform inertia, restoring and hub height must be positive")
        if self.damping < 0:
            raise ValueError("platform damping must be non-negative")

    @property
    def natural_frequency(self) -> float:
        return float(np.sqrt(self.restoring / self.inertia))

    @property
    def damping_ratio(self) -> float:
        return float(self.damping / (2.0 * np.sqrt(self.restoring * self.inertia)))


@dataclass(frozen=True)
class ActuatorParams:
    """First-order actuator models. ``enabled=False`` makes every actuator ideal."""

    beta_time_constant: float = 0.2
    tau_p_time_constant: float = 0.25
    tau_p_max: float = 2.0e8
    ballast_time_constant: float = 120.0
    enabled: bool = True


@dataclass
class FowtState:
    theta: float = 0.0
    omega_g: float = 0.0
    phi: float = 0.0
    phi_dot: float = 0.0
    beta_act: float = 0.0
    tau_p_act: float = 0.0
    ballast_act: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array(np.broadcast_arrays(*astuple(self)), dtype=float)

    @classmethod
    def from_array(cls, x) -> "FowtState":
        return cls(*x)


STATE_NAMES = tuple(f.name for f in fields(FowtState))


@dataclass
class PlantInputs:
    wind: float
    beta_cmd: float = 0.0
    tau_g: float = 0.0
    tau_p_cmd: float = 0.0
    ballast_moment: float = 0.0


def relative_wind(v, phi_dot, ht, floor=WIND_FLOOR):
    """Wind seen by the rotor when the tower top moves at ``ht * phi_dot``."""
    return np.maximum(v - ht * phi_dot, floor)


def rates(x, wind, beta_cmd, tau_g, tau_p_cmd, ballast_cmd, geom: RotorGeometry,
          surface, platform: PlatformParams, act: ActuatorParams):
    """Packed-array right-hand side; no checks, for the integrator's inner loop."""
    theta, omega_g, phi, phi_dot, beta_act, tau_p_act, ballast_act = x
    vr = relative_wind(wind, phi_dot, platform.hub_height)
    if act.enabled:
        beta, tau_p, ballast = beta_act, tau_p_act, ballast_act
    else:
        beta, tau_p, ballast = beta_cmd, tau_p_cmd, ballast_cmd
    tau_a, thrust = aero_loads(geom, surface, omega_g, vr, beta)
    ng = geom.gearbox_ratio
    omega_dot = ng / geom.rotor_inertia * (tau_a - ng * tau_g)
    phi_ddot = (platform.hub_height * thrust + tau_p + ballast
                - platform.damping * phi_dot - platform.restoring * phi) / platform.inertia
    if act.enabled:
        beta_rate = np.minimum(np.maximum((beta_cmd - beta_act) / act.beta_time_constant,
                                          -geom.beta_rate_max), geom.beta_rate_max)
        tau_p_target = np.minimum(np.maximum(tau_p_cmd, -act.tau_p_max), act.tau_p_max)
        tau_p_rate = (tau_p_target - tau_p_act) / act.tau_p_time_constant
        ballast_rate = (ballast_cmd - ballast_act) / act.ballast_time_constant
    else:
        beta_rate = tau_p_rate = ballast_rate = np.zeros_like(omega_dot)
    return np.stack(np.broadcast_arrays(omega_g, omega_dot, phi_dot, phi_ddot,
                                        beta_rate, tau_p_rate, ballast_rate)).astype(float, copy=False)


def derivatives(state: FowtState, inputs: PlantInputs, geom: RotorGeometry,
                surface: PerformanceSurface, platform: PlatformParams,
                actuators: ActuatorParams = ActuatorParams()) -> FowtState:
    """Time derivative of ``state``; raises :class:`DivergenceError` past the small-angle guard."""
    x = state.to_array()
    if not np.all(np.isfinite(x)):
        raise DivergenceError("non-finite plant state")
    if np.any(np.abs(x[2]) >= np.pi / 2):
        raise DivergenceError("platform pitch left the small-angle regime")
    if np.any(np.asarray(inputs.wind) <= 0):
        raise ValueError("wind speed must be positive")
    dx = rates(x, inputs.wind, inputs.beta_cmd, inputs.tau_g, inputs.tau_p_cmd,
               inputs.ballast_moment, geom, surface, platform, actuators)
    return FowtState.from_array(dx)
