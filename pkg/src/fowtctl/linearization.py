"""Above-rated trim points, the 4-state linear model and minimum-phase analysis.

Linear state: [theta, omega_g, phi, phi_dot] perturbations.
Linear input: [wind, blade pitch, generator torque, platform moment] perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .fowt_model import PlatformParams
from .rotor_aero import AeroPartials, FDSteps, RotorGeometry, aero_loads, partials

# state / input indices
THETA, OMEGA, PHI, PHI_DOT = range(4)
WIND, PITCH, GEN_TORQUE, PTFM_MOMENT = range(4)

RHP_TOL = 1e-9


class TrimError(ValueError):
    pass


class DegeneracyError(ValueError):
    pass


@dataclass(frozen=True)
class OperatingPoint:
    v_bar: float
    beta_bar: float
    omega_bar: float
    tau_g_bar: float
    phi_bar: float
    partials: AeroPartials


@dataclass(frozen=True, eq=False)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    op: OperatingPoint
    nmpz: bool


def tuning_speeds(geom: RotorGeometry, spacing=0.5):
    """Tuning grid: ``spacing`` steps from just above rated up to cut-out."""
    return np.arange(geom.rated_wind + 0.1, geom.cutout_wind + 1e-9, spacing)


def reference_speeds(lo=12, hi=24):
    return np.arange(lo, hi + 1, dtype=float)


def find_operating_point(geom: RotorGeometry, surface, platform: PlatformParams, v_bar,
                         steps: FDSteps = FDSteps()) -> OperatingPoint:
    """Rated-speed, rated-torque trim at mean wind ``v_bar``."""
    v_bar = float(v_bar)
    if not geom.rated_wind < v_bar <= geom.cutout_wind:
        raise TrimError(f"{v_bar} m/s is outside the above-rated range")
    omega, tau_g = geom.rated_gen_speed, geom.rated_gen_torque
    target = geom.gearbox_ratio * tau_g

    def residual(beta):
        return aero_loads(geom, surface, omega, v_bar, beta)[0] - target

    lo, hi = geom.beta_min, geom.beta_max
    r_lo, r_hi = residual(lo), residual(hi)
    if np.sign(r_lo) == np.sign(r_hi):
        raise TrimError(f"no pitch in [{lo}, {hi}] balances rated torque at {v_bar} m/s")
    beta = brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(residual(beta)) / target > 1e-10:
        raise TrimError(f"trim residual not converged at {v_bar} m/s")
    thrust = aero_loads(geom, surface, omega, v_bar, beta)[1]
    phi = platform.hub_height * thrust / platform.restoring
    return OperatingPoint(v_bar, float(beta), omega, tau_g, float(phi),
                          partials(geom, surface, omega, v_bar, beta, steps))


def build_state_space(op: OperatingPoint, geom: RotorGeometry, platform: PlatformParams) -> LinearModel:
    p = op.partials
    ng, jr = geom.gearbox_ratio, geom.rotor_inertia
    ht, jt = platform.hub_height, platform.inertia
    A = np.zeros((4, 4))
    A[THETA, OMEGA] = 1.0
    A[OMEGA, OMEGA] = ng / jr * p.dtau_domega
    A[OMEGA, PHI_DOT] = -ht * ng / jr * p.dtau_dv
    A[PHI, PHI_DOT] = 1.0
    A[PHI_DOT, OMEGA] = ht / jt * p.dthrust_domega
    A[PHI_DOT, PHI] = -platform.restoring / jt
    # relative wind enters the thrust moment twice, hence ht**2
    A[PHI_DOT, PHI_DOT] = -(platform.damping + ht**2 * p.dthrust_dv) / jt
    B = np.zeros((4, 4))
    B[OMEGA, WIND] = ng / jr * p.dtau_dv
    B[OMEGA, PITCH] = ng / jr * p.dtau_dbeta
    B[OMEGA, GEN_TORQUE] = -ng**2 / jr
    B[PHI_DOT, WIND] = ht / jt * p.dthrust_dv
    B[PHI_DOT, PITCH] = ht / jt * p.dthrust_dbeta
    B[PHI_DOT, PTFM_MOMENT] = 1.0 / jt
    return LinearModel(A, B, op, nmpz_predicate(op, platform))


def _effective_thrust_slope(op: OperatingPoint, m_tau_g):
    p = op.partials
    if p.dtau_dbeta == 0:
        raise DegeneracyError("torque is insensitive to pitch at this operating point")
    return p.dthrust_dv - (1.0 - m_tau_g) * p.dtau_dv * p.dthrust_dbeta / p.dtau_dbeta


def nmpz_predicate(op: OperatingPoint, platform: PlatformParams) -> bool:
    """True when pitch-to-speed has right-half-plane zeros at this trim."""
    return nmpz_compensated(op, platform, 0.0)


def nmpz_compensated(op: OperatingPoint, platform: PlatformParams, m_tau_g) -> bool:
    """NMPZ test with a fraction ``m_tau_g`` of full generator-torque compensation."""
    if not 0.0 <= m_tau_g <= 1.0:
        raise ValueError("m_tau_g must lie in [0, 1]")
    lhs = platform.hub_height**2 * _effective_thrust_slope(op, m_tau_g)
    return bool(lhs < -platform.damping)


def nmpz_boundary(ops, platform: PlatformParams):
    """Highest mean wind speed in ``ops`` that still has NMPZs (None if none do)."""
    flagged = [op.v_bar for op in ops if nmpz_predicate(op, platform)]
    return max(flagged) if flagged else None


def _krylov_basis(A, v, rtol):
    """Orthonormal basis of span{v, Av, A^2 v, ...} by Gram-Schmidt with deflation."""
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(v))
    basis = []
    w = np.asarray(v, dtype=float)
    for _ in range(n):
        for _ in range(2):  # re-orthogonalize once for stability
            for q in basis:
                w = w - (q @ w) * q
        nw = np.linalg.norm(w)
        if nw <= rtol * scale:
            break
        basis.append(w / nw)
        w = A @ basis[-1]
    return np.column_stack(basis) if basis else np.zeros((n, 0))


def minimal_siso(A, b, c, rtol=1e-10):
    """Drop uncontrollable then unobservable modes of (A, b, c)."""
    Q = _krylov_basis(A, b, rtol)
    A1, b1, c1 = Q.T @ A @ Q, Q.T @ b, c @ Q
    if A1.shape[0] == 0:
        return A1, b1, c1
    P = _krylov_basis(A1.T, c1, rtol)
    return P.T @ A1 @ P, P.T @ b1, c1 @ P


def transmission_zeros(model, input_index=PITCH, output_index=OMEGA, A=None):
    """Finite zeros of one input/state channel from the Rosenbrock pencil.

    ``A`` overrides ``model.A`` (e.g. a compensated closed-loop matrix).
    """
    A = model.A if A is None else np.asarray(A, dtype=float)
    b = model.B[:, input_index]
    c = np.zeros(A.shape[0])
    c[output_index] = 1.0
    Am, bm, cm = minimal_siso(A, b, c)
    n = Am.shape[0]
    if n == 0:
        raise DegeneracyError("channel has an identically zero transfer function")
    M = np.zeros((n + 1, n + 1))
    M[:n, :n], M[:n, n], M[n, :n] = Am, bm, cm
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    alpha, beta = scipy.linalg.eig(M, N, right=False, homogeneous_eigvals=True)
    if np.any((np.abs(alpha) < 1e-300) & (np.abs(beta) < 1e-300)):
        raise DegeneracyError("singular system pencil")
    finite = np.abs(beta) > 1e-12 * np.abs(alpha)
    z = alpha[finite] / beta[finite]
    return np.sort_complex(z[np.abs(z) < 1e12])


def has_rhp_zero(zeros, tol=RHP_TOL) -> bool:
    return bool(np.any(np.real(zeros) > tol))


def spectral_abscissa(M) -> float:
    return float(np.max(np.real(np.linalg.eigvals(M))))


def linearize_sweep(geom, surface, platform, speeds):
    return [build_state_space(find_operating_point(geom, surface, platform, v), geom, platform)
            for v in speeds]
