"""Rotor aerodynamics from tabulated power and thrust coefficient surfaces.

Torque is returned on the low-speed shaft and thrust at the hub; both are
functions of generator speed, rotor-averaged wind speed and collective blade
pitch. All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BETZ_LIMIT = 16.0 / 27.0
CT_MAX = 1.6


class SurfaceError(ValueError):
    """Raised for malformed coefficient tables or out-of-hull derivative requests."""


@dataclass(frozen=True)
class RotorGeometry:
    """Rotor and drivetrain constants (defaults: DTU 10-MW reference turbine)."""

    radius: float = 89.15
    air_density: float = 1.225
    gearbox_ratio: float = 50.0
    rotor_inertia: float = 1.5676e8
    rated_gen_speed: float = 9.6 * 50.0 * np.pi / 30.0
    rated_gen_torque: float = 10.0e6 / (9.6 * 50.0 * np.pi / 30.0)
    rated_wind: float = 11.4
    cutout_wind: float = 25.0
    beta_min: float = 0.0
    beta_max: float = 0.7
    beta_rate_max: float = 0.087

    def __post_init__(self):
        positive = ("radius", "air_density", "gearbox_ratio", "rotor_inertia",
                    "rated_gen_speed", "rated_gen_torque", "rated_wind",
                    "cutout_wind", "beta_rate_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.beta_min < self.beta_max:
            raise ValueError("beta_min must be below beta_max")
        if not self.rated_wind < self.cutout_wind:
            raise ValueError("rated_wind must be below cutout_wind")

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    def tip_speed_ratio(self, omega_g, v):
        return omega_g / self.gearbox_ratio * self.radius / v


def _cell(grid, x):
    """Cell index and fractional weight of ``x`` on ``grid``, clamping outside."""
    xc = np.minimum(np.maximum(x, grid[0]), grid[-1])
    i = np.searchsorted(grid, xc, side="right") - 1
    i = np.minimum(np.maximum(i, 0), len(grid) - 2)
    w = (xc - grid[i]) / (grid[i + 1] - grid[i])
    return i, w, xc != x


@dataclass(frozen=True, eq=False)
class PerformanceSurface:
    """Cp and Ct tabulated on a (tip-speed ratio, pitch) grid.

    Tables are indexed ``table[i_lambda, j_beta]``.
    """

    lambda_grid: np.ndarray
    beta_grid: np.ndarray
    cp_table: np.ndarray
    ct_table: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("lambda_grid", "beta_grid", "cp_table", "ct_table"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrays[name] = a
        lam, beta = arrays["lambda_grid"], arrays["beta_grid"]
        for name, g in (("lambda_grid", lam), ("beta_grid", beta)):
            if g.ndim != 1 or g.size < 2:
                raise SurfaceError(f"{name} needs at least two samples")
            if np.any(np.diff(g) <= 0):
                raise SurfaceError(f"{name} must be strictly increasing")
        shape = (lam.size, beta.size)
        for name in ("cp_table", "ct_table"):
            if arrays[name].shape != shape:
                raise SurfaceError(f"{name} has shape {arrays[name].shape}, expected {shape}")
            if not np.all(np.isfinite(arrays[name])):
                raise SurfaceError(f"{name} contains non-finite entries")
        cp, ct = arrays["cp_table"], arrays["ct_table"]
        if cp.min() < 0 or cp.max() > BETZ_LIMIT + 1e-12:
            raise SurfaceError("Cp outside [0, Betz limit]")
        if ct.min() < 0:
            raise SurfaceError("negative Ct")
        both = np.ascontiguousarray(np.stack([cp, ct], axis=-1))
        both.setflags(write=False)
        object.__setattr__(self, "_both", both)

    def lookup(self, lam, beta):
        """Bilinear (Cp, Ct) without the clamp flag; the simulator's inner loop."""
        i, wl, _ = _cell(self.lambda_grid, lam)
        j, wb, _ = _cell(self.beta_grid, beta)
        t = self._both
        wl1, wb1 = 1 - wl, 1 - wb
        a = t[i, j]
        b = t[i + 1, j]
        c = t[i, j + 1]
        d = t[i + 1, j + 1]
        cp = (wl1 * wb1) * a[..., 0] + (wl * wb1) * b[..., 0] + (wl1 * wb) * c[..., 0] + (wl * wb) * d[..., 0]
        ct = (wl1 * wb1) * a[..., 1] + (wl * wb1) * b[..., 1] + (wl1 * wb) * c[..., 1] + (wl * wb) * d[..., 1]
        return cp, ct

    def coefficients(self, lam, beta):
        """Bilinear Cp, Ct at (lam, beta) plus a flag set where the query was clamped."""
        i, wl, cl = _cell(self.lambda_grid, lam)
        j, wb, cb = _cell(self.beta_grid, beta)
        w00 = (1 - wl) * (1 - wb)
        w10 = wl * (1 - wb)
        w01 = (1 - wl) * wb
        w11 = wl * wb
        cp = (w00 * self.cp_table[i, j] + w10 * self.cp_table[i + 1, j]
              + w01 * self.cp_table[i, j + 1] + w11 * self.cp_table[i + 1, j + 1])
        ct = (w00 * self.ct_table[i, j] + w10 * self.ct_table[i + 1, j]
              + w01 * self.ct_table[i, j + 1] + w11 * self.ct_table[i + 1, j + 1])
        return cp, ct, cl | cb

    def contains(self, lam, beta, lam_margin=0.0, beta_margin=0.0):
        lam_ok = (lam - lam_margin >= self.lambda_grid[0]) & (lam + lam_margin <= self.lambda_grid[-1])
        beta_ok = (beta - beta_margin >= self.beta_grid[0]) & (beta + beta_margin <= self.beta_grid[-1])
        return lam_ok & beta_ok

    def save(self, path):
        """Write the plain-text table format read by :func:`load_surface`."""
        lines = ["# rotor performance surface: rows are tip-speed ratio, columns blade pitch [rad]"]
        lines.append("lambda " + " ".join(repr(float(x)) for x in self.lambda_grid))
        lines.append("beta " + " ".join(repr(float(x)) for x in self.beta_grid))
        for name, table in (("cp", self.cp_table), ("ct", self.ct_table)):
            lines.append(name)
            lines.extend(" ".join(repr(float(x)) for x in row) for row in table)
        Path(path).write_text("\n".join(lines) + "\n")


def load_surface(path) -> PerformanceSurface:
    grids = {}
    blocks = {"cp": [], "ct": []}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head in ("lambda", "beta"):
            grids[head] = [float(x) for x in rest.split()]
        elif head in ("cp", "ct") and not rest:
            current = head
        elif current is not None:
            blocks[current].append([float(x) for x in line.split()])
        else:
            raise SurfaceError(f"unexpected line in surface file: {raw!r}")
    if set(grids) != {"lambda", "beta"}:
        raise SurfaceError("surface file must define both lambda and beta grids")
    try:
        cp = np.array(blocks["cp"], dtype=float)
        ct = np.array(blocks["ct"], dtype=float)
    except ValueError as exc:
        raise SurfaceError("ragged coefficient table") from exc
    return PerformanceSurface(grids["lambda"], grids["beta"], cp, ct)


@dataclass(frozen=True)
class SurrogateParams:
    """Constants of the analytic Cp/Ct stand-in and the grid it is tabulated on.

    Cp uses the six-constant empirical form. Pitch enters the linear terms in
    degrees; the cubic term uses radians unless ``cubic_in_degrees`` is set
    (the all-degrees variant has a near-flat Cp band between 3 and 6 deg).
    Ct = ct0 * (lambda / lambda_ref) * exp(-k_beta * beta) with pitch in rad.
    """

    c: tuple = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068)
    ct0: float = 0.8
    lambda_ref: float = 8.0
    k_beta: float = 4.0
    lambda_range: tuple = (2.0, 15.0)
    beta_range: tuple = (0.0, 0.7)
    n_lambda: int = 131
    n_beta: int = 141
    cubic_in_degrees: bool = False


@dataclass(frozen=True)
class AnalyticSurface:
    """Closed-form surrogate surface; same ``coefficients`` interface as the table."""

    params: SurrogateParams = field(default_factory=SurrogateParams)

    def cp(self, lam, beta):
        c1, c2, c3, c4, c5, c6 = self.params.c
        bdeg = np.degrees(beta)
        bcub = bdeg if self.params.cubic_in_degrees else beta
        inv_li = 1.0 / (lam + 0.08 * bdeg) - 0.035 / (bcub**3 + 1.0)
        cp = c1 * (c2 * inv_li - c3 * bdeg - c4) * np.exp(-c5 * inv_li) + c6 * lam
        return np.clip(cp, 0.0, BETZ_LIMIT)

    def ct(self, lam, beta):
        p = self.params
        return np.clip(p.ct0 * (lam / p.lambda_ref) * np.exp(-p.k_beta * beta), 0.0, CT_MAX)

    def coefficients(self, lam, beta):
        return self.cp(lam, beta), self.ct(lam, beta), np.zeros(np.shape(lam + beta), dtype=bool)

    def lookup(self, lam, beta):
        return self.cp(lam, beta), self.ct(lam, beta)

    def contains(self, lam, beta, lam_margin=0.0, beta_margin=0.0):
        return np.ones(np.shape(lam + beta), dtype=bool)


def build_surrogate_surface(params: SurrogateParams = SurrogateParams()) -> PerformanceSurface:
    if params.n_lambda < 20 or params.n_beta < 20:
        raise ValueError("surrogate grid needs at least 20 x 20 nodes")
    lam = np.linspace(*params.lambda_range, params.n_lambda)
    beta = np.linspace(*params.beta_range, params.n_beta)
    L, B = np.meshgrid(lam, beta, indexing="ij")
    analytic = AnalyticSurface(params)
    return PerformanceSurface(lam, beta, analytic.cp(L, B), analytic.ct(L, B))


def interp_coefficient(surface: PerformanceSurface, which: str, lam, beta, with_flag=False):
    """Bilinear lookup of ``which`` in {"power", "thrust"}."""
    cp, ct, clamped = surface.coefficients(lam, beta)
    if which == "power":
        value = cp
    elif which == "thrust":
        value = ct
    else:
        raise ValueError(f"which must be 'power' or 'thrust', got {which!r}")
    return (value, clamped) if with_flag else value


def aero_loads(geom: RotorGeometry, surface, omega_g, v, beta):
    """Low-speed-shaft torque and rotor thrust without argument checks (hot path)."""
    lam = omega_g * (geom.radius / geom.gearbox_ratio) / v
    cp, ct = surface.lookup(lam, beta)
    q = 0.5 * geom.air_density * geom.area * v * v
    torque = q * v * cp * geom.gearbox_ratio / omega_g
    return torque, q * ct


def _check_domain(omega_g, v):
    if np.any(np.asarray(omega_g) <= 0) or np.any(np.asarray(v) <= 0):
        raise ValueError("generator speed and wind speed must be positive")


def aero_torque(geom: RotorGeometry, surface, omega_g, v, beta):
    _check_domain(omega_g, v)
    return aero_loads(geom, surface, omega_g, v, beta)[0]


def aero_thrust(geom: RotorGeometry, surface, omega_g, v, beta):
    _check_domain(omega_g, v)
    return aero_loads(geom, surface, omega_g, v, beta)[1]


@dataclass(frozen=True)
class FDSteps:
    omega_g: float = 1e-3
    v: float = 1e-3
    beta: float = 1e-4


@dataclass(frozen=True)
class AeroPartials:
    dtau_domega: float
    dtau_dv: float
    dtau_dbeta: float
    dthrust_domega: float
    dthrust_dv: float
    dthrust_dbeta: float

    def scaled(self, factor):
        return AeroPartials(*(factor * getattr(self, f) for f in self.__dataclass_fields__))


def partials(geom: RotorGeometry, surface, omega_g, v, beta, steps: FDSteps = FDSteps()) -> AeroPartials:
    """Central-difference sensitivities of torque and thrust."""
    _check_domain(omega_g, v)
    lam_lo = geom.tip_speed_ratio(omega_g - steps.omega_g, v + steps.v)
    lam_hi = geom.tip_speed_ratio(omega_g + steps.omega_g, v - steps.v)
    lam = geom.tip_speed_ratio(omega_g, v)
    inside = (surface.contains(lam_lo, beta, beta_margin=steps.beta)
              & surface.contains(lam_hi, beta, beta_margin=steps.beta)
              & surface.contains(lam, beta, beta_margin=steps.beta))
    if not np.all(inside):
        raise SurfaceError("operating point too close to the surface edge for finite differences")

    def diff(dw, dv, db, h):
        tp, fp = aero_loads(geom, surface, omega_g + dw, v + dv, beta + db)
        tm, fm = aero_loads(geom, surface, omega_g - dw, v - dv, beta - db)
        return (tp - tm) / (2 * h), (fp - fm) / (2 * h)

    t_w, f_w = diff(steps.omega_g, 0.0, 0.0, steps.omega_g)
    t_v, f_v = diff(0.0, steps.v, 0.0, steps.v)
    t_b, f_b = diff(0.0, 0.0, steps.beta, steps.beta)
    return AeroPartials(t_w, t_v, t_b, f_w, f_v, f_b)


def optimal_tip_speed_ratio(surface, beta=0.0, samples=4001):
    """(Cp_max, lambda_opt) along the pitch line ``beta`` of ``surface``."""
    if isinstance(surface, PerformanceSurface):
        lo, hi = surface.lambda_grid[0], surface.lambda_grid[-1]
    else:
        lo, hi = surface.params.lambda_range
    lam = np.linspace(lo, hi, samples)
    cp = surface.coefficients(lam, np.full_like(lam, beta))[0]
    k = int(np.argmax(cp))
    return float(cp[k]), float(lam[k])
