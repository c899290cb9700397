"""Model-based gain tuning: pitch PI, detuning, parallel compensation, platform loops.

Sign conventions
----------------
Pitch PI acts on the speed error ``omega_rated - omega_g`` so that the gains
come out negative above rated. Compensation terms are
``beta_c = -kc_beta * phi_dot`` and ``tau_g_c = -kc_tau_g * phi_dot``; a
forward-swinging rotor has ``phi_dot < 0``. Platform PID output is
``tau_p = -(kp * phi + ki * int(phi) + kd * phi_dot)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fowt_model import PlatformParams
from .linearization import (GEN_TORQUE, OMEGA, PHI_DOT, PITCH, THETA, LinearModel,
                            OperatingPoint, DegeneracyError)
from .rotor_aero import RotorGeometry, optimal_tip_speed_ratio

BASELINE_SPEC = (0.3, 0.7)
DETUNED_SPEC = (0.2, 1.0)
HIGH_SPEED_SPEC = (0.5, 0.7)
DEFAULT_M_BETA = 0.5
PHI_DOT_MAX = 0.0175


class TuningError(ValueError):
    pass


@dataclass(frozen=True)
class TransientSpec:
    omega_pi: float
    zeta_pi: float

    def __post_init__(self):
        if not (self.omega_pi > 0 and self.zeta_pi > 0):
            raise ValueError("omega_pi and zeta_pi must be positive")


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Gains per operating point, indexed by trim blade pitch."""

    index: np.ndarray
    kp: np.ndarray
    ki: np.ndarray
    kc_beta: np.ndarray
    kc_tau_g: np.ndarray
    m_beta: np.ndarray
    m_tau_g: np.ndarray
    v_bar: np.ndarray = None
    omega_pi: np.ndarray = None
    zeta_pi: np.ndarray = None
    dual: bool = False

    def __post_init__(self):
        n = np.size(self.index)
        for name in ("index", "kp", "ki", "kc_beta", "kc_tau_g", "m_beta", "m_tau_g",
                     "v_bar", "omega_pi", "zeta_pi"):
            value = getattr(self, name)
            if value is None:
                value = np.full(n, np.nan)
            a = np.array(value, dtype=float).reshape(-1)
            if a.size != n:
                raise ValueError(f"{name} has {a.size} entries, expected {n}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if n < 1 or np.any(np.diff(self.index) <= 0):
            raise ValueError("schedule index must be strictly increasing")
        if self.dual and np.any(np.abs(self.m_beta + self.m_tau_g - 1.0) > 1e-12):
            raise ValueError("dual compensation fractions must sum to one")

    def lookup(self, beta):
        """Interpolated (kp, ki, kc_beta, kc_tau_g) at pitch ``beta``, held flat off the ends."""
        return tuple(np.interp(beta, self.index, g) for g in (self.kp, self.ki, self.kc_beta, self.kc_tau_g))


@dataclass(frozen=True)
class PlatformGains:
    pid_kp: float = 0.0
    pid_ki: float = 0.0
    pid_kd: float = 0.0
    ballast_ki: float = 0.0
    ballast_filter_cutoff: float = 0.01


def _pitch_sensitivity(op: OperatingPoint, geom: RotorGeometry):
    b = geom.gearbox_ratio / geom.rotor_inertia * op.partials.dtau_dbeta
    if b == 0:
        raise DegeneracyError("torque is insensitive to pitch at this operating point")
    return b


def pi_gains(op: OperatingPoint, spec: TransientSpec, geom: RotorGeometry):
    """PI gains placing the rigid-platform speed loop at (omega_pi, zeta_pi)."""
    a = geom.gearbox_ratio / geom.rotor_inertia * op.partials.dtau_domega
    b = _pitch_sensitivity(op, geom)
    kp = (a + 2.0 * spec.zeta_pi * spec.omega_pi) / b
    ki = spec.omega_pi**2 / b
    return kp, ki


def build_detune_schedule(kind, ops, geom: RotorGeometry = RotorGeometry(),
                          low=DETUNED_SPEC, high=HIGH_SPEED_SPEC):
    """Per-operating-point transient targets for ``kind`` in baseline/detuned/scheduled."""
    if kind == "baseline":
        return [TransientSpec(*BASELINE_SPEC) for _ in ops]
    if kind == "detuned":
        return [TransientSpec(*DETUNED_SPEC) for _ in ops]
    if kind != "scheduled":
        raise ValueError(f"unknown detuning kind {kind!r}")
    specs = []
    for op in ops:
        s = (op.v_bar - geom.rated_wind) / (geom.cutout_wind - geom.rated_wind)
        s = min(max(s, 0.0), 1.0)
        specs.append(TransientSpec(low[0] + s * (high[0] - low[0]), low[1] + s * (high[1] - low[1])))
    return specs


def gamma_c_beta(op: OperatingPoint, platform: PlatformParams):
    """Blade-pitch gain that fully cancels platform-rate coupling into speed."""
    p = op.partials
    if p.dtau_dbeta == 0:
        raise DegeneracyError("torque is insensitive to pitch at this operating point")
    return -platform.hub_height * p.dtau_dv / p.dtau_dbeta


def gamma_c_tau_g(op: OperatingPoint, geom: RotorGeometry, platform: PlatformParams):
    """Generator-torque gain that fully cancels platform-rate coupling into speed."""
    return platform.hub_height / geom.gearbox_ratio * op.partials.dtau_dv


def torque_comp_gain(geom: RotorGeometry, tau_g_max, phi_dot_max=PHI_DOT_MAX):
    """Constant kc_tau_g that reaches ``tau_g_max`` at a forward pitch rate of ``phi_dot_max``."""
    if phi_dot_max <= 0:
        raise TuningError("phi_dot_max must be positive")
    return (tau_g_max - geom.rated_gen_torque) / phi_dot_max


def m_tau_from_saturation(op: OperatingPoint, geom: RotorGeometry, platform: PlatformParams,
                          phi_dot_max=PHI_DOT_MAX, tau_g_max=None):
    """Largest torque-compensation fraction that stays inside the torque limit."""
    if tau_g_max is None:
        tau_g_max = 1.2 * geom.rated_gen_torque
    kc = torque_comp_gain(geom, tau_g_max, phi_dot_max)
    gamma = gamma_c_tau_g(op, geom, platform)
    if gamma <= 0:
        raise TuningError("torque compensation gain must be positive above rated")
    return float(min(max(kc / gamma, 0.0), 1.0))


def dual_split(op: OperatingPoint, geom: RotorGeometry, platform: PlatformParams,
               phi_dot_max=PHI_DOT_MAX, tau_g_max=None):
    """(m_beta, m_tau_g) sharing full compensation between pitch and torque."""
    m_tau = m_tau_from_saturation(op, geom, platform, phi_dot_max, tau_g_max)
    return 1.0 - m_tau, m_tau


def build_gain_schedule(ops, geom: RotorGeometry, platform: PlatformParams, detune="baseline",
                        compensation="none", m_beta=DEFAULT_M_BETA, phi_dot_max=PHI_DOT_MAX,
                        tau_g_max=None) -> GainSchedule:
    """Assemble the pitch/torque schedule for one controller variant.

    ``compensation`` is one of none, beta, torque, dual.
    """
    if compensation not in ("none", "beta", "torque", "dual"):
        raise ValueError(f"unknown compensation mode {compensation!r}")
    ops = sorted(ops, key=lambda op: op.beta_bar)
    specs = build_detune_schedule(detune, ops, geom)
    rows = []
    for op, spec in zip(ops, specs):
        kp, ki = pi_gains(op, spec, geom)
        g_beta = gamma_c_beta(op, platform)
        g_tau = gamma_c_tau_g(op, geom, platform)
        mb = mt = 0.0
        if compensation == "beta":
            mb = m_beta
        elif compensation in ("torque", "dual"):
            mt = m_tau_from_saturation(op, geom, platform, phi_dot_max, tau_g_max)
            if compensation == "dual":
                mb = 1.0 - mt
        rows.append((op.beta_bar, kp, ki, mb * g_beta, mt * g_tau, mb, mt,
                     op.v_bar, spec.omega_pi, spec.zeta_pi))
    cols = np.array(rows).T
    return GainSchedule(*cols, dual=compensation == "dual")


def closed_loop_matrix(model: LinearModel, kp, ki, kc_beta=0.0, kc_tau_g=0.0):
    """4-state closed loop with pitch PI plus pitch/torque platform-rate feedback."""
    K = np.zeros((4, 4))
    K[PITCH, THETA] = -ki
    K[PITCH, OMEGA] = -kp
    K[PITCH, PHI_DOT] = -kc_beta
    K[GEN_TORQUE, PHI_DOT] = -kc_tau_g
    return model.A + model.B @ K


def rigid_platform_loop(model: LinearModel, kp, ki):
    """Closed (theta, omega) loop with the platform frozen."""
    A = model.A[:2, :2]
    b = model.B[:2, PITCH]
    return A + np.outer(b, [-ki, -kp])


def tune_platform_pid(platform: PlatformParams, bandwidth=1.0, zeta=0.7) -> PlatformGains:
    """Pole placement of the pitch PID: (s^2 + 2 zeta wc s + wc^2)(s + wc)."""
    if bandwidth <= platform.natural_frequency:
        raise TuningError("platform PID bandwidth must exceed the platform natural frequency")
    jt, wc = platform.inertia, bandwidth
    kd = jt * (2.0 * zeta + 1.0) * wc - platform.damping
    kp = jt * (1.0 + 2.0 * zeta) * wc**2 - platform.restoring
    ki = jt * wc**3
    return PlatformGains(pid_kp=kp, pid_ki=ki, pid_kd=kd)


def platform_pid_matrix(platform: PlatformParams, gains: PlatformGains):
    """Closed-loop matrix of the (phi, phi_dot, int phi) platform system."""
    jt = platform.inertia
    return np.array([
        [0.0, 1.0, 0.0],
        [-(platform.restoring + gains.pid_kp) / jt, -(platform.damping + gains.pid_kd) / jt,
         -gains.pid_ki / jt],
        [1.0, 0.0, 0.0],
    ])


def tune_ballast(platform: PlatformParams, settle_time=600.0):
    """Integral gain and heel-filter corner for the slow ballast loop.

    First-order approximation ignoring the ballast lag: the mean heel then
    decays as exp(-t * ki / kt), and ki is picked so 10% remains at
    ``settle_time``.
    """
    if settle_time < 120.0:
        raise TuningError("ballast settle time must be at least 120 s")
    ki = platform.restoring * np.log(10.0) / settle_time
    return ki, 10.0 / settle_time


def kw2_gain(geom: RotorGeometry, surface):
    """Below-rated torque coefficient for optimal tip-speed-ratio tracking."""
    cp_max, lam_opt = optimal_tip_speed_ratio(surface, geom.beta_min)
    return 0.5 * geom.air_density * np.pi * geom.radius**5 * cp_max / (lam_opt**3 * geom.gearbox_ratio**3)
