from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fowtctl.fowt_model import PlatformParams
from fowtctl.linearization import (GEN_TORQUE, OMEGA, PHI_DOT, PITCH, PTFM_MOMENT, DegeneracyError,
                                   LinearModel, OperatingPoint, TrimError, build_state_space,
                                   find_operating_point, has_rhp_zero, nmpz_boundary,
                                   nmpz_compensated, nmpz_predicate, transmission_zeros)
from fowtctl.rotor_aero import AeroPartials, PerformanceSurface, RotorGeometry
from fowtctl.tuning import gamma_c_beta, gamma_c_tau_g

from oracles import compensated_matrix, max_relative_mismatch, numerical_jacobian, symbolic_zeros


def hand_op(**p):
    base = dict(dtau_domega=-2e5, dtau_dv=2e6, dtau_dbeta=-4e7, dthrust_domega=1e4,
                dthrust_dv=1.5e5, dthrust_dbeta=-2e6)
    base.update(p)
    return OperatingPoint(15.0, 0.2, 50.0, 2e5, 0.05, AeroPartials(**base))


# ---- trim ----------------------------------------------------------------------------

def test_trim_pitch_increases_with_wind(ref_ops, geom):
    betas = [op.beta_bar for op in ref_ops]
    assert np.all(np.diff(betas) > 0)
    assert betas[0] < 0.1 and all(geom.beta_min <= b <= geom.beta_max for b in betas)


def test_trim_residual(ref_ops, geom, surface):
    from fowtctl.rotor_aero import aero_torque
    for op in ref_ops:
        target = geom.gearbox_ratio * op.tau_g_bar
        residual = aero_torque(geom, surface, op.omega_bar, op.v_bar, op.beta_bar) - target
        assert abs(residual) / target < 1e-10
        assert op.omega_bar == geom.rated_gen_speed and op.tau_g_bar == geom.rated_gen_torque


def test_heel_halves_with_double_stiffness(geom, surface, platform):
    a = find_operating_point(geom, surface, platform, 16.0)
    b = find_operating_point(geom, surface, replace(platform, restoring=2 * platform.restoring), 16.0)
    assert b.beta_bar == a.beta_bar
    assert b.phi_bar == pytest.approx(a.phi_bar / 2, rel=1e-15)


def test_trim_errors(geom, surface, platform):
    with pytest.raises(TrimError):
        find_operating_point(geom, surface, platform, 10.0)
    with pytest.raises(TrimError):
        find_operating_point(geom, surface, platform, 26.0)
    weak = PerformanceSurface([1.0, 20.0], [0.0, 1.0], np.full((2, 2), 1e-3), np.zeros((2, 2)))
    with pytest.raises(TrimError):
        find_operating_point(geom, weak, platform, 15.0)


# ---- state space ---------------------------------------------------------------------

def test_structure(ref_ops, geom, platform):
    for op in ref_ops:
        m = build_state_space(op, geom, platform)
        assert np.all(m.A[:, 0] == 0)
        assert m.A[0, 1] == 1 and m.A[2, 3] == 1
        allowed_a = np.array([[0, 1, 0, 0], [0, 1, 0, 1], [0, 0, 0, 1], [0, 1, 1, 1]], bool)
        allowed_b = np.array([[0, 0, 0, 0], [1, 1, 1, 0], [0, 0, 0, 0], [1, 1, 0, 1]], bool)
        assert np.all(m.A[~allowed_a] == 0) and np.all(m.B[~allowed_b] == 0)
        assert m.B[1, GEN_TORQUE] == -geom.gearbox_ratio**2 / geom.rotor_inertia
        assert m.B[3, PTFM_MOMENT] == 1 / platform.inertia
        # torque and platform moment each drive a single state
        assert np.count_nonzero(m.B[:, GEN_TORQUE]) == 1
        assert np.count_nonzero(m.B[:, PTFM_MOMENT]) == 1


def test_entries_by_formula(geom, platform):
    op = hand_op()
    m = build_state_space(op, geom, platform)
    p, ng, jr = op.partials, geom.gearbox_ratio, geom.rotor_inertia
    ht, jt = platform.hub_height, platform.inertia
    assert m.A[1, 1] == pytest.approx(ng / jr * p.dtau_domega)
    assert m.A[1, 3] == pytest.approx(-ht * ng / jr * p.dtau_dv)
    assert m.A[3, 1] == pytest.approx(ht / jt * p.dthrust_domega)
    assert m.A[3, 2] == pytest.approx(-platform.restoring / jt)
    assert m.A[3, 3] == pytest.approx(-(platform.damping + ht**2 * p.dthrust_dv) / jt)


def test_zero_hub_height_decouples(geom):
    flat = SimpleNamespace(hub_height=0.0, inertia=2.5e10, damping=1.6e9, restoring=2e9)
    m = build_state_space(hand_op(), geom, flat)
    assert m.A[1, 3] == 0 and m.A[3, 1] == 0
    assert transmission_zeros(m, PITCH, OMEGA).size == 0


def test_matches_numerical_jacobian(ref_ops, geom, surface, platform):
    for op in ref_ops:
        m = build_state_space(op, geom, platform)
        A, B = numerical_jacobian(op, geom, surface, platform)
        assert max_relative_mismatch(m.A, A) < 1e-6
        assert max_relative_mismatch(m.B, B) < 1e-6


def test_zero_eigenvalue_and_stabilizable_submodel(ref_ops, geom, platform):
    for op in ref_ops:
        m = build_state_space(op, geom, platform)
        assert np.min(np.abs(np.linalg.eigvals(m.A))) < 1e-12
        A3, B3 = m.A[1:, 1:], m.B[1:, :]
        ctrb = np.hstack([np.linalg.matrix_power(A3, k) @ B3 for k in range(3)])
        assert np.linalg.matrix_rank(ctrb) == 3


# ---- NMPZ predicates -----------------------------------------------------------------

def test_large_damping_is_minimum_phase(ref_ops):
    stiff = PlatformParams(damping=1e15)
    assert not any(nmpz_predicate(op, stiff) for op in ref_ops)


def test_pitch_insensitive_thrust_is_minimum_phase(platform):
    assert not nmpz_predicate(hand_op(dthrust_dbeta=0.0), platform)


def test_degenerate_partials(platform):
    with pytest.raises(DegeneracyError):
        nmpz_predicate(hand_op(dtau_dbeta=0.0), platform)
    with pytest.raises(ValueError):
        nmpz_compensated(hand_op(), platform, 1.5)


def test_compensated_reductions(ref_ops, platform):
    for op in ref_ops:
        assert nmpz_compensated(op, platform, 0.0) == nmpz_predicate(op, platform)
        assert not nmpz_compensated(op, platform, 1.0)


def test_compensation_sweep_is_monotone(ref_ops, platform):
    grid = np.linspace(0, 1, 101)
    for op in ref_ops:
        flags = [nmpz_compensated(op, platform, m) for m in grid]
        first_false = flags.index(False)
        assert not any(flags[first_false:])


def test_default_platform_has_nmpz_near_rated(ref_ops, platform):
    flags = [nmpz_predicate(op, platform) for op in ref_ops]
    assert flags[0] and not flags[-1]
    assert nmpz_boundary(ref_ops, platform) == 14.0


@settings(max_examples=50, deadline=None)
@given(factor=st.floats(1e-3, 1e3), k=st.integers(0, 12))
def test_predicate_invariant_under_common_scaling(ref_ops, platform, factor, k):
    op = ref_ops[k]
    scaled_op = replace(op, partials=op.partials.scaled(factor))
    scaled_pf = PlatformParams(platform.inertia * factor, platform.damping * factor,
                               platform.restoring * factor, platform.hub_height)
    for m in (0.0, 0.3, 0.7):
        assert nmpz_compensated(scaled_op, scaled_pf, m) == nmpz_compensated(op, platform, m)


# ---- transmission zeros --------------------------------------------------------------

def test_zeros_match_symbolic_numerator():
    A = np.array([[0.0, 1.0, 0.0, 0.0],
                  [0.0, -0.3, 0.0, -0.8],
                  [0.0, 0.0, 0.0, 1.0],
                  [0.0, 0.02, -0.08, 0.05]])
    B = np.zeros((4, 4))
    B[1, PITCH], B[3, PITCH] = -1.5, -0.4
    model = LinearModel(A, B, None, False)
    c = np.eye(4)[OMEGA]
    want = symbolic_zeros(A, B[:, PITCH], c)
    got = transmission_zeros(model, PITCH, OMEGA)
    assert got.size == want.size == 2
    assert same_roots(got, want, rtol=1e-9, atol=1e-12)


def same_roots(got, want, rtol, atol):
    """Order-free comparison: each wanted root has a distinct close partner."""
    if got.size != want.size:
        return False
    left = list(got)
    for w in want:
        k = int(np.argmin([abs(g - w) for g in left]))
        if abs(left[k] - w) > atol + rtol * abs(w):
            return False
        left.pop(k)
    return True


def tenths(lo, hi):
    return st.integers(lo, hi).map(lambda k: k / 10)


@settings(max_examples=40, deadline=None)
@given(a22=tenths(-10, 5), a24=tenths(-20, 20), a42=st.integers(-10, 10).map(lambda k: k / 100),
       a44=tenths(-5, 5), b2=tenths(-30, -1), b4=tenths(-10, 10))
def test_zeros_match_symbolic_numerator_random(a22, a24, a42, a44, b2, b4):
    A = np.array([[0, 1, 0, 0], [0, a22, 0, a24], [0, 0, 0, 1], [0, a42, -0.08, a44]], float)
    B = np.zeros((4, 4))
    B[1, PITCH], B[3, PITCH] = b2, b4
    want = symbolic_zeros(A, B[:, PITCH], np.eye(4)[OMEGA])
    got = transmission_zeros(LinearModel(A, B, None, False), PITCH, OMEGA)
    assert same_roots(got, want, rtol=1e-6, atol=1e-7)


def test_zeros_agree_with_predicate(ref_ops, geom, platform):
    for op in ref_ops:
        m = build_state_space(op, geom, platform)
        assert has_rhp_zero(transmission_zeros(m, PITCH, OMEGA)) == m.nmpz


def test_compensated_zeros_agree_with_predicate(ref_ops, geom, platform):
    for op in ref_ops:
        m = build_state_space(op, geom, platform)
        for mt in (0.0, 0.25, 0.5, 0.75, 1.0):
            A = compensated_matrix(m, 0.0, mt, gamma_c_beta(op, platform), gamma_c_tau_g(op, geom, platform))
            rhp = has_rhp_zero(transmission_zeros(m, PITCH, OMEGA, A=A))
            assert rhp == nmpz_compensated(op, platform, mt)


def test_identically_zero_channel_is_degenerate():
    A = np.zeros((4, 4))
    B = np.zeros((4, 4))
    with pytest.raises(DegeneracyError):
        transmission_zeros(LinearModel(A, B, None, False), PITCH, OMEGA)


def test_phi_dot_row_of_hand_model(geom, platform):
    m = build_state_space(hand_op(), geom, platform)
    assert m.B[PHI_DOT, PITCH] == pytest.approx(platform.hub_height / platform.inertia * -2e6)
