"""Discrete-time turbine and platform controller.

Every quantity in :class:`ControllerState` may be a scalar or a 1-D array, in
which case one call advances a batch of independent controllers that share a
configuration. Only elementwise arithmetic and table lookups are used, so a
batched run is bit-identical to the same runs stepped one at a time.

Pitch PI acts on ``omega_rated - omega_filtered`` with the (negative) gains
from :mod:`fowtctl.tuning`: ``beta = kp * e + integral(ki * e)``, both gains
looked up at the previous pitch command. The integrator therefore holds blade
pitch in rad and stays bumpless while the gains move along the schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import signal

from .rotor_aero import RotorGeometry
from .tuning import GainSchedule, PlatformGains

COMPENSATION_MODES = ("none", "beta", "torque", "dual")
BALLAST_MODES = ("off", "static", "closed")


@dataclass(frozen=True)
class FilterCorners:
    gen_speed: float = 2.0
    pitch_rate_low: float = 2.0
    pitch_rate_high: float = 0.01

    def __post_init__(self):
        if not (self.gen_speed > 0 and self.pitch_rate_low > 0 and self.pitch_rate_high > 0):
            raise ValueError("filter corners must be positive")


def _prewarp(corner, dt):
    return 2.0 / dt * np.tan(corner * dt / 2.0)


def lowpass2(corner, dt):
    """Butterworth 2nd-order low-pass (b, a), bilinear with prewarping at ``corner``."""
    wa = _prewarp(corner, dt)
    b, a = signal.bilinear([wa**2], [1.0, np.sqrt(2.0) * wa, wa**2], fs=1.0 / dt)
    # rescale so rounding in the coefficients cannot bias the filtered speed at DC
    return b * (np.sum(a) / np.sum(b)), a


def highpass1(corner, dt):
    wa = _prewarp(corner, dt)
    return signal.bilinear([1.0, 0.0], [1.0, wa], fs=1.0 / dt)


@dataclass(frozen=True, eq=False)
class Biquad:
    """Direct-form-II-transposed section, padded to second order."""

    b: np.ndarray
    a: np.ndarray

    @classmethod
    def from_ba(cls, b, a):
        b = np.asarray(b, dtype=float) / a[0]
        a = np.asarray(a, dtype=float) / a[0]
        b = np.pad(b, (0, 3 - b.size))
        a = np.pad(a, (0, 3 - a.size))
        return cls(b, a)

    def steady_state(self, x0):
        """Delay-line contents for a filter that has seen ``x0`` forever."""
        x0 = np.asarray(x0, dtype=float)
        y0 = np.sum(self.b) / np.sum(self.a) * x0
        return y0 - self.b[0] * x0, self.b[2] * x0 - self.a[2] * y0

    def step(self, x, z1, z2):
        b0, b1, b2 = self.b
        _, a1, a2 = self.a
        y = b0 * x + z1
        z1 = b1 * x - a1 * y + z2
        z2 = b2 * x - a2 * y
        return y, z1, z2

    def poles(self):
        return np.roots(self.a[: np.max(np.nonzero(self.a)) + 1])


def filters(raw, z, section: Biquad):
    """One filter update; returns (output, new delay line). ``z`` is a (z1, z2) pair."""
    y, z1, z2 = section.step(raw, *z)
    return y, (z1, z2)


def pitch_compensation(kc_beta, pitch_rate):
    """Blade-pitch offset opposing platform pitch rate (forward swing pitches to feather)."""
    return -kc_beta * pitch_rate


def torque_compensation(kc_tau_g, pitch_rate):
    """Generator-torque offset; a forward swing (negative rate) raises torque."""
    return -kc_tau_g * pitch_rate


def anti_windup(integrator, increment, command, limited_command):
    """Conditional integration: skip the update when it pushes further into saturation."""
    pushing_up = (command > limited_command) & (increment > 0)
    pushing_down = (command < limited_command) & (increment < 0)
    return np.where(pushing_up | pushing_down, integrator, integrator + increment)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    schedule: GainSchedule
    rated_speed: float
    rated_torque: float
    tau_g_max: float
    kw2_gain: float
    platform_gains: PlatformGains = field(default_factory=PlatformGains)
    compensation: str = "none"
    detune: str = "baseline"
    use_platform_pid: bool = False
    ballast_mode: str = "off"
    corners: FilterCorners = field(default_factory=FilterCorners)
    beta_min: float = 0.0
    beta_max: float = 0.7
    beta_rate_max: float = 0.087
    tau_p_max: float = 2.0e8
    region2_band: float = 0.02
    dt_ctrl: float = 0.02

    def __post_init__(self):
        if not self.dt_ctrl > 0:
            raise ValueError("dt_ctrl must be positive")
        if self.compensation not in COMPENSATION_MODES:
            raise ValueError(f"compensation must be one of {COMPENSATION_MODES}")
        if self.ballast_mode not in BALLAST_MODES:
            raise ValueError(f"ballast_mode must be one of {BALLAST_MODES}")
        if not 0 <= self.rated_torque <= self.tau_g_max:
            raise ValueError("rated torque must lie in [0, tau_g_max]")
        if self.compensation == "dual" and not self.schedule.dual:
            raise ValueError("dual compensation needs a schedule built with compensation='dual'")
        speed = Biquad.from_ba(*lowpass2(self.corners.gen_speed, self.dt_ctrl))
        rate_lp = Biquad.from_ba(*lowpass2(self.corners.pitch_rate_low, self.dt_ctrl))
        rate_hp = Biquad.from_ba(*highpass1(self.corners.pitch_rate_high, self.dt_ctrl))
        bal = Biquad.from_ba(*signal.bilinear(
            [1.0], [1.0 / _prewarp(self.platform_gains.ballast_filter_cutoff, self.dt_ctrl), 1.0],
            fs=1.0 / self.dt_ctrl))
        object.__setattr__(self, "_sections", (speed, rate_lp, rate_hp, bal))

    @classmethod
    def from_geometry(cls, schedule, geom: RotorGeometry, kw2_gain, tau_g_max=None, **kw):
        if tau_g_max is None:
            tau_g_max = 1.2 * geom.rated_gen_torque
        return cls(schedule=schedule, rated_speed=geom.rated_gen_speed,
                   rated_torque=geom.rated_gen_torque, tau_g_max=tau_g_max, kw2_gain=kw2_gain,
                   beta_min=geom.beta_min, beta_max=geom.beta_max,
                   beta_rate_max=geom.beta_rate_max, **kw)

    @property
    def use_beta_comp(self):
        return self.compensation == "beta"

    @property
    def use_torque_comp(self):
        return self.compensation == "torque"

    @property
    def use_dual_comp(self):
        return self.compensation == "dual"

    @property
    def use_detuned_schedule(self):
        return self.detune != "baseline"

    @property
    def use_ballast(self):
        return self.ballast_mode == "closed"

    @property
    def sections(self):
        """(gen-speed LPF, pitch-rate LPF, pitch-rate HPF, heel LPF)."""
        return self._sections


@dataclass
class Measurements:
    omega_g: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray


@dataclass
class Commands:
    beta: np.ndarray
    tau_g: np.ndarray
    tau_p: np.ndarray
    ballast: np.ndarray
    ballast_rate: np.ndarray
    fault: np.ndarray


@dataclass
class ControllerState:
    speed_error_integral: np.ndarray
    phi_integral: np.ndarray
    ballast_integral: np.ndarray
    speed_filter: tuple
    rate_low: tuple
    rate_high: tuple
    heel_filter: tuple
    filtered_gen_speed: np.ndarray
    filtered_pitch_rate: np.ndarray
    below_rated: np.ndarray
    beta_cmd: np.ndarray
    tau_g_cmd: np.ndarray
    tau_p_cmd: np.ndarray

    def copy(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = tuple(np.array(x, copy=True) for x in v) if isinstance(v, tuple) else np.array(v, copy=True)
        return ControllerState(**out)


def initial_state(cfg: ControllerConfig, omega_g, beta, tau_g=None, ballast=0.0) -> ControllerState:
    """Controller state consistent with a steady trim (zero platform motion)."""
    omega_g = np.asarray(omega_g, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), omega_g.shape).copy()
    speed, rate_lp, rate_hp, heel = cfg.sections
    zero = np.zeros_like(omega_g)
    if tau_g is None:
        tau_g = np.where(omega_g < cfg.rated_speed * (1 - cfg.region2_band),
                         cfg.kw2_gain * omega_g**2, cfg.rated_torque)
    below = (omega_g < cfg.rated_speed * (1 - cfg.region2_band)) & (beta <= cfg.beta_min)
    return ControllerState(
        speed_error_integral=beta,
        phi_integral=zero.copy(),
        ballast_integral=np.broadcast_to(np.asarray(ballast, dtype=float), omega_g.shape).copy(),
        speed_filter=speed.steady_state(omega_g),
        rate_low=rate_lp.steady_state(zero),
        rate_high=rate_hp.steady_state(zero),
        heel_filter=heel.steady_state(zero),
        filtered_gen_speed=omega_g.copy(),
        filtered_pitch_rate=zero.copy(),
        below_rated=below,
        beta_cmd=beta.copy(),
        tau_g_cmd=np.broadcast_to(np.asarray(tau_g, dtype=float), omega_g.shape).copy(),
        tau_p_cmd=zero.copy(),
    )


def step(cfg: ControllerConfig, state: ControllerState, meas: Measurements, dt=None):
    """Advance one controller period; returns (commands, new state)."""
    if dt is not None and dt != cfg.dt_ctrl:
        raise ValueError(f"controller period is {cfg.dt_ctrl} s, got {dt}")
    dt = cfg.dt_ctrl
    omega = np.asarray(meas.omega_g, dtype=float)
    phi = np.asarray(meas.phi, dtype=float)
    phi_dot = np.asarray(meas.phi_dot, dtype=float)
    fault = ~(np.isfinite(omega) & np.isfinite(phi) & np.isfinite(phi_dot))
    if np.any(fault):
        omega = np.where(fault, state.filtered_gen_speed, omega)
        phi = np.where(fault, 0.0, phi)
        phi_dot = np.where(fault, 0.0, phi_dot)
    speed_lp, rate_lp, rate_hp, heel_lp = cfg.sections

    # (a) measurement filtering
    wf, zs = filters(omega, state.speed_filter, speed_lp)
    r1, zr1 = filters(phi_dot, state.rate_low, rate_lp)
    rf, zr2 = filters(r1, state.rate_high, rate_hp)

    # (b) gains from the previous pitch command
    kp, ki, kc_beta, kc_tau = cfg.schedule.lookup(state.beta_cmd)

    # (c, d) pitch PI plus blade compensation
    err = cfg.rated_speed - wf
    inc = ki * err * dt
    beta_raw = kp * err + state.speed_error_integral + inc
    if cfg.compensation in ("beta", "dual"):
        beta_raw = beta_raw + pitch_compensation(kc_beta, rf)
    lo = np.maximum(cfg.beta_min, state.beta_cmd - cfg.beta_rate_max * dt)
    hi = np.minimum(cfg.beta_max, state.beta_cmd + cfg.beta_rate_max * dt)
    beta = np.minimum(np.maximum(beta_raw, lo), hi)
    integral = anti_windup(state.speed_error_integral, inc, beta_raw, beta)

    # (e, f) generator torque with below-rated switch
    at_min = beta <= cfg.beta_min
    enter = wf < cfg.rated_speed * (1.0 - cfg.region2_band)
    below = np.where(state.below_rated, wf < cfg.rated_speed, enter & at_min)
    tau_above = np.full_like(wf, cfg.rated_torque)
    if cfg.compensation in ("torque", "dual"):
        tau_above = tau_above + torque_compensation(kc_tau, rf)
    tau_g = np.where(below, cfg.kw2_gain * wf * wf, tau_above)
    tau_g = np.minimum(np.maximum(tau_g, 0.0), cfg.tau_g_max)

    # (g) platform PID toward zero heel
    g = cfg.platform_gains
    phi_int = state.phi_integral
    if cfg.use_platform_pid:
        inc_p = phi * dt
        raw_p = -(g.pid_kp * phi + g.pid_ki * (phi_int + inc_p) + g.pid_kd * phi_dot)
        tau_p = np.minimum(np.maximum(raw_p, -cfg.tau_p_max), cfg.tau_p_max)
        # integrator enters the output with a minus sign
        phi_int = anti_windup(phi_int, inc_p, tau_p, raw_p)
    else:
        tau_p = np.zeros_like(wf)

    # (h) slow ballast integral on the low-passed heel
    heel, zh = filters(phi, state.heel_filter, heel_lp)
    if cfg.ballast_mode == "closed":
        ballast_rate = -g.ballast_ki * heel
    else:
        ballast_rate = np.zeros_like(wf)
    ballast = state.ballast_integral + ballast_rate * dt

    if np.any(fault):
        beta = np.where(fault, state.beta_cmd, beta)
        tau_g = np.where(fault, state.tau_g_cmd, tau_g)
        tau_p = np.where(fault, state.tau_p_cmd, tau_p)
        ballast_rate = np.where(fault, 0.0, ballast_rate)
        ballast = np.where(fault, state.ballast_integral, ballast)
        integral = np.where(fault, state.speed_error_integral, integral)
        phi_int = np.where(fault, state.phi_integral, phi_int)

    new = ControllerState(
        speed_error_integral=integral, phi_integral=phi_int, ballast_integral=ballast,
        speed_filter=zs, rate_low=zr1, rate_high=zr2, heel_filter=zh,
        filtered_gen_speed=wf, filtered_pitch_rate=rf, below_rated=below,
        beta_cmd=beta, tau_g_cmd=tau_g, tau_p_cmd=tau_p,
    )
    return Commands(beta, tau_g, tau_p, ballast, ballast_rate, fault), new


def with_flags(cfg: ControllerConfig, **changes) -> ControllerConfig:
    return replace(cfg, **changes)
