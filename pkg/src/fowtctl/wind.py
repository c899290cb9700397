"""Rotor-averaged wind inputs: seeded turbulence and deterministic test signals.

Turbulence is a first-order (Kaimal-form) shaped noise process with time
constant ``L / V`` and the normal-turbulence-model standard deviation
``i_ref * (0.75 V + 5.6)``. Each series is rescaled to hit the target mean
and standard deviation exactly, then floored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

LENGTH_SCALE = 340.2
FLOOR = 0.5
KINDS = ("turbulent", "constant", "step", "sine")


@dataclass(frozen=True)
class WindConfig:
    mean_speed: float
    i_ref: float = 0.14
    seed: int = 0
    dt: float = 0.05
    duration: float = 800.0
    kind: str = "turbulent"
    length_scale: float = LENGTH_SCALE
    # step and sine parameters
    jump: float = 0.0
    t_jump: float = 0.0
    amplitude: float = 0.0
    period: float = 60.0

    def __post_init__(self):
        if not self.mean_speed > 0:
            raise ValueError("mean_speed must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration >= self.dt:
            raise ValueError("duration must be at least one time step")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.i_ref < 0:
            raise ValueError("i_ref must be non-negative")
        if self.kind == "step" and not 0 < self.t_jump < self.duration:
            raise ValueError("t_jump must lie inside (0, duration)")
        if self.kind == "sine" and not self.period > 0:
            raise ValueError("sine period must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    @property
    def sigma(self) -> float:
        return ntm_sigma(self.mean_speed, self.i_ref)

    @property
    def time_constant(self) -> float:
        return self.length_scale / self.mean_speed


@dataclass(frozen=True, eq=False)
class WindSeries:
    time: np.ndarray
    speed: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0])

    def at(self, t):
        """Linear interpolation, held at the end values."""
        return np.interp(t, self.time, self.speed)


def ntm_sigma(v, i_ref=0.14):
    return i_ref * (0.75 * v + 5.6)


def time_grid(cfg: WindConfig):
    return np.arange(cfg.n_samples) * cfg.dt


def shaped_noise(n, dt, time_constant, rng):
    """Unit-variance stationary first-order shaped noise (exact discretization)."""
    a = np.exp(-dt / time_constant)
    w = rng.standard_normal(n)
    rest, _ = signal.lfilter([np.sqrt(1.0 - a * a)], [1.0, -a], w[1:], zi=[a * w[0]])
    return np.concatenate(([w[0]], rest))


def shaping_spectrum(omega, sigma, time_constant):
    """Two-sided power spectral density of the shaping filter output, per rad/s."""
    return sigma**2 * time_constant / np.pi / (1.0 + (omega * time_constant) ** 2)


def synthesize(cfg: WindConfig) -> WindSeries:
    t = time_grid(cfg)
    if cfg.kind == "constant":
        v = np.full(t.size, cfg.mean_speed)
    elif cfg.kind == "step":
        return step_signal(cfg.mean_speed, cfg.jump, cfg.t_jump, cfg)
    elif cfg.kind == "sine":
        v = cfg.mean_speed + cfg.amplitude * np.sin(2.0 * np.pi * t / cfg.period)
    else:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        x = shaped_noise(t.size, cfg.dt, cfg.time_constant, rng)
        x = x - x.mean()
        sd = x.std()
        if sd > 0:
            x = x / sd
        v = cfg.mean_speed + cfg.sigma * x
    return WindSeries(t, np.maximum(v, FLOOR))


def step_signal(base, jump, t_jump, cfg: WindConfig) -> WindSeries:
    if not 0 < t_jump < cfg.duration:
        raise ValueError("t_jump must lie inside (0, duration)")
    t = time_grid(cfg)
    k = int(round(t_jump / cfg.dt))
    v = np.full(t.size, float(base))
    v[k:] += jump
    return WindSeries(t, np.maximum(v, FLOOR))


def constant(speed, duration=800.0, dt=0.05) -> WindSeries:
    return synthesize(WindConfig(speed, dt=dt, duration=duration, kind="constant"))


def save_csv(series: WindSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "speed"])
        for t, v in zip(series.time, series.speed):
            w.writerow([f"{t:.9g}", f"{v:.9g}"])


def load_csv(path) -> WindSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["time", "speed"]:
        raise ValueError(f"{path}: expected header 'time,speed'")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: time column must be strictly increasing with ≥ 2 rows")
    if np.any(data[:, 1] <= 0):
        raise ValueError(f"{path}: wind speed must be positive")
    return WindSeries(data[:, 0], data[:, 1])


def with_seed(cfg: WindConfig, seed) -> WindConfig:
    return replace(cfg, seed=int(seed))

