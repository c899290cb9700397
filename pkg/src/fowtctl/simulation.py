"""Fixed-step closed-loop simulation and run metrics.

Runs are batched along the last array axis: the plant state is a (7, n_runs)
array and every operation in the loop is elementwise, so a run's trajectory
does not depend on which other runs share its batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import controller as ctl
from .fowt_model import (ActuatorParams, DivergenceError, FowtState, PlatformParams,
                         rates, relative_wind)
from .linearization import find_operating_point
from .rotor_aero import RotorGeometry, aero_loads
from .wind import WindSeries

CHANNELS = ("wind", "omega_g", "phi", "phi_dot", "beta", "tau_g", "tau_p", "myt", "power")
METRIC_CHANNELS = ("omega_g", "phi", "myt", "power")
OVERSPEED_RATIO = 1.2


@dataclass(frozen=True)
class Plant:
    geom: RotorGeometry
    surface: object
    platform: PlatformParams
    actuators: ActuatorParams = field(default_factory=ActuatorParams)
    tower_share: float = 0.5


@dataclass(frozen=True)
class SimConfig:
    duration: float = 800.0
    discard: float = 200.0
    dt_plant: float = 0.005
    dt_ctrl: float = 0.02
    initial: str = "trim"

    def __post_init__(self):
        if not 0 <= self.discard < self.duration:
            raise ValueError("discard must lie in [0, duration)")
        if not (self.dt_plant > 0 and self.dt_ctrl > 0):
            raise ValueError("time steps must be positive")
        if abs(self.substeps * self.dt_plant - self.dt_ctrl) > 1e-12 * self.dt_ctrl:
            raise ValueError("dt_ctrl must be an integer multiple of dt_plant")
        if self.initial not in ("trim", "given"):
            raise ValueError("initial must be 'trim' or 'given'")

    @property
    def substeps(self) -> int:
        return max(int(round(self.dt_ctrl / self.dt_plant)), 1)

    @property
    def n_ctrl(self) -> int:
        return int(round(self.duration / self.dt_ctrl))


@dataclass(eq=False)
class SimResult:
    time: np.ndarray
    channels: dict
    diverged: np.ndarray
    divergence_time: np.ndarray
    final_state: np.ndarray

    def __getitem__(self, name):
        return self.channels[name]

    @property
    def n_runs(self):
        return self.diverged.size

    def run(self, i) -> dict:
        return {k: v[i] for k, v in self.channels.items()}


@dataclass(frozen=True)
class RunMetrics:
    gen_speed_std: float
    gen_speed_max: float
    myt_std: float
    myt_max: float
    mean_power: float
    max_platform_pitch: float
    overspeed_flag: bool

    FIELDS = ("gen_speed_std", "gen_speed_max", "myt_std", "myt_max", "mean_power",
              "max_platform_pitch", "overspeed_flag")


class NormalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Normalization:
    """Reference tower moment (mean Myt of the baseline controller at the reference speed)."""

    myt_reference: float
    reference_speed: float = 12.0
    n_runs: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.myt_reference) and self.myt_reference != 0):
            raise NormalizationError("normalization reference must be finite and non-zero")

    def save(self, path):
        Path(path).write_text(json.dumps({"myt_reference": repr(float(self.myt_reference)),
                                          "reference_speed": self.reference_speed,
                                          "n_runs": self.n_runs}, indent=2) + "\n")

    @classmethod
    def load(cls, path):
        p = Path(path)
        if not p.exists():
            raise NormalizationError(f"no normalization reference at {p}; run the Baseline "
                                     "variant at the reference speed first")
        d = json.loads(p.read_text())
        return cls(float(d["myt_reference"]), float(d["reference_speed"]), int(d["n_runs"]))


def tower_moment_proxy(plant: Plant, omega_g, wind, phi, phi_dot, beta):
    """Tower-base fore-aft moment stand-in: hub thrust moment plus a share of the heel moment.

    This is a proxy built from the rigid-platform states, not a structural load.
    """
    vr = relative_wind(wind, phi_dot, plant.platform.hub_height)
    thrust = aero_loads(plant.geom, plant.surface, omega_g, vr, beta)[1]
    return plant.platform.hub_height * thrust + plant.tower_share * plant.platform.restoring * phi


def trim_state(plant: Plant, v_bar, ballast_moment=0.0) -> np.ndarray:
    """Packed steady state at mean wind ``v_bar`` (above rated)."""
    op = find_operating_point(plant.geom, plant.surface, plant.platform, v_bar)
    p = plant.platform
    thrust = aero_loads(plant.geom, plant.surface, op.omega_bar, v_bar, op.beta_bar)[1]
    phi = (p.hub_height * thrust + ballast_moment) / p.restoring
    return FowtState(0.0, op.omega_bar, phi, 0.0, op.beta_bar, 0.0, ballast_moment).to_array()


def static_ballast(plant: Plant, v_bar) -> float:
    """A-priori ballast moment cancelling the mean thrust heel at ``v_bar``."""
    op = find_operating_point(plant.geom, plant.surface, plant.platform, v_bar)
    thrust = aero_loads(plant.geom, plant.surface, op.omega_bar, v_bar, op.beta_bar)[1]
    return -plant.platform.hub_height * thrust


def _wind_matrix(winds):
    if isinstance(winds, WindSeries):
        winds = [winds]
    t = winds[0].time
    for w in winds[1:]:
        if w.time.shape != t.shape or np.any(w.time != t):
            raise ValueError("all wind series in a batch must share one time grid")
    return t, np.ascontiguousarray(np.stack([w.speed for w in winds]))


class _WindLookup:
    """Linear interpolation on a uniform grid shared by the whole batch."""

    def __init__(self, t, W):
        self.t0 = float(t[0])
        self.dt = float(t[1] - t[0])
        if np.any(np.abs(np.diff(t) - self.dt) > 1e-9 * self.dt):
            raise ValueError("wind time grid must be uniform")
        self.W = W
        self.last = W.shape[1] - 1

    def __call__(self, time):
        s = (time - self.t0) / self.dt
        i = min(max(int(np.floor(s)), 0), self.last - 1)
        w = min(max(s - i, 0.0), 1.0)
        a, b = self.W[:, i], self.W[:, i + 1]
        return a + w * (b - a)


def integrate(plant: Plant, controller, winds, cfg: SimConfig = SimConfig(), x0=None,
              ballast=0.0, commands=None, channels=CHANNELS, v_trim=None) -> SimResult:
    """Integrate a batch of runs with classical RK4 and a zero-order-hold controller.

    ``controller`` is a :class:`ControllerConfig` or None (open loop, commands
    held at ``commands`` or at the initial trim). ``ballast`` is the a-priori
    static ballast moment per run, added to the closed-loop ballast command.
    ``v_trim`` gives the trim wind per run (default: each series' mean).
    """
    t_wind, W = _wind_matrix(winds)
    if t_wind[-1] < cfg.duration - 1e-9:
        raise ValueError("wind series is shorter than the simulation")
    n = W.shape[0]
    lookup = _WindLookup(t_wind, W)
    ballast = np.broadcast_to(np.asarray(ballast, dtype=float), (n,)).copy()
    if x0 is None:
        if cfg.initial != "trim":
            raise ValueError("initial='given' needs x0")
        means = [float(np.mean(row)) for row in W] if v_trim is None else \
            np.broadcast_to(np.asarray(v_trim, dtype=float), (n,))
        x = np.column_stack([trim_state(plant, v, b) for v, b in zip(means, ballast)])
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, dtype=float).reshape(7, -1), (7, n)))

    if controller is not None:
        if abs(controller.dt_ctrl - cfg.dt_ctrl) > 1e-15:
            raise ValueError("controller period differs from the simulation dt_ctrl")
        cstate = ctl.initial_state(controller, x[1], x[4], ballast=np.zeros(n))
        beta_cmd, tau_g, tau_p = cstate.beta_cmd, cstate.tau_g_cmd, cstate.tau_p_cmd
        ballast_cmd = ballast.copy()
    else:
        cmd = commands or {}
        beta_cmd = np.broadcast_to(np.asarray(cmd.get("beta", x[4]), dtype=float), (n,)).copy()
        tau_g = np.broadcast_to(np.asarray(cmd.get("tau_g", plant.geom.rated_gen_torque),
                                           dtype=float), (n,)).copy()
        tau_p = np.broadcast_to(np.asarray(cmd.get("tau_p", 0.0), dtype=float), (n,)).copy()
        ballast_cmd = ballast.copy()

    geom, surf, pf, act = plant.geom, plant.surface, plant.platform, plant.actuators
    h = cfg.dt_plant
    m = cfg.substeps
    n_ctrl = cfg.n_ctrl
    logs = {c: np.empty((n, n_ctrl + 1)) for c in channels}
    diverged = np.zeros(n, dtype=bool)
    t_div = np.full(n, np.nan)

    def f(xx, v):
        return rates(xx, v, beta_cmd, tau_g, tau_p, ballast_cmd, geom, surf, pf, act)

    def record(k, v):
        if not logs:
            return
        values = {"wind": v, "omega_g": x[1], "phi": x[2], "phi_dot": x[3], "beta": x[4],
                  "tau_g": tau_g, "tau_p": x[5] if act.enabled else tau_p,
                  "power": x[1] * tau_g}
        if "myt" in logs:
            beta_eff = x[4] if act.enabled else beta_cmd
            values["myt"] = tower_moment_proxy(plant, x[1], v, x[2], x[3], beta_eff)
        for c, arr in logs.items():
            arr[:, k] = values[c]

    v_now = lookup(0.0)
    record(0, v_now)
    for k in range(n_ctrl):
        t = k * cfg.dt_ctrl
        if controller is not None:
            cmds, cstate = ctl.step(controller, cstate, ctl.Measurements(x[1], x[2], x[3]))
            beta_cmd, tau_g, tau_p = cmds.beta, cmds.tau_g, cmds.tau_p
            ballast_cmd = ballast + cmds.ballast
        v0 = v_now
        for j in range(m):
            tj = t + j * h
            vm = lookup(tj + 0.5 * h)
            v1 = lookup(tj + h)
            k1 = f(x, v0)
            k2 = f(x + 0.5 * h * k1, vm)
            k3 = f(x + 0.5 * h * k2, vm)
            k4 = f(x + h * k3, v1)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            v0 = v1
        v_now = v0
        bad = ~np.all(np.isfinite(x), axis=0) | (np.abs(x[2]) >= np.pi / 2)
        new_bad = bad & ~diverged
        if np.any(new_bad):
            t_div[new_bad] = t + cfg.dt_ctrl
            diverged |= new_bad
        if np.any(diverged):
            # park diverged runs on a harmless state so the batch keeps going
            x[:, diverged] = np.array([0.0, geom.rated_gen_speed, 0.0, 0.0, 0.0, 0.0, 0.0])[:, None]
            if controller is not None:
                cstate = _park_controller(controller, cstate, diverged, geom)
        record(k + 1, v_now)
    time = np.arange(n_ctrl + 1) * cfg.dt_ctrl
    for c in logs:
        logs[c][diverged] = np.nan
    return SimResult(time, logs, diverged, t_div, x)


def _park_controller(cfg, cstate, mask, geom):
    fresh = ctl.initial_state(cfg, np.full(mask.sum(), geom.rated_gen_speed), np.zeros(mask.sum()))
    for name in ("speed_error_integral", "phi_integral", "ballast_integral", "filtered_gen_speed",
                 "filtered_pitch_rate", "below_rated", "beta_cmd", "tau_g_cmd", "tau_p_cmd"):
        getattr(cstate, name)[mask] = getattr(fresh, name)
    for name in ("speed_filter", "rate_low", "rate_high", "heel_filter"):
        for dst, src in zip(getattr(cstate, name), getattr(fresh, name)):
            dst[mask] = src
    return cstate


def simulate(plant: Plant, controller, wind: WindSeries, cfg: SimConfig = SimConfig(), **kw):
    """Single run; raises :class:`DivergenceError` with the failure time if it blows up."""
    res = integrate(plant, controller, [wind], cfg, **kw)
    if res.diverged[0]:
        raise DivergenceError(f"simulation diverged at t = {res.divergence_time[0]:.3f} s")
    return res


def _window(time, discard):
    return time >= discard - 1e-9


def compute_metrics(run: dict, time, cfg: SimConfig, normalization: Normalization | None,
                    rated_speed) -> RunMetrics:
    """Statistics over ``t >= discard`` of one run (channels as 1-D arrays)."""
    if normalization is None:
        raise NormalizationError("missing tower-moment normalization; run the Baseline "
                                 "variant at the reference speed first")
    if time[-1] <= cfg.discard:
        raise ValueError("series does not extend past the discard time")
    win = _window(time, cfg.discard)
    w = np.ascontiguousarray(run["omega_g"][win])
    myt = np.ascontiguousarray(run["myt"][win])
    power = np.ascontiguousarray(run["power"][win])
    phi = np.ascontiguousarray(run["phi"][win])
    ref = normalization.myt_reference
    return RunMetrics(
        gen_speed_std=float(np.std(w) / rated_speed),
        gen_speed_max=float(np.max(w) / rated_speed),
        myt_std=float(np.std(myt) / abs(ref)),
        myt_max=float(np.max(np.abs(myt)) / abs(ref)),
        mean_power=float(np.mean(power)),
        max_platform_pitch=float(np.max(np.abs(phi))),
        overspeed_flag=bool(np.max(w) > OVERSPEED_RATIO * rated_speed),
    )


def window_mean(run: dict, time, cfg: SimConfig, channel="myt") -> float:
    return float(np.mean(np.ascontiguousarray(run[channel][_window(time, cfg.discard)])))


def write_timeseries_csv(result: SimResult, index, path):
    cols = [c for c in CHANNELS if c in result.channels]
    data = np.column_stack([result.time] + [result.channels[c][index] for c in cols])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["time"] + cols) + "\n")
        for row in data:
            fh.write(",".join(f"{x:.9g}" for x in row) + "\n")

