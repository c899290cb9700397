import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal
from scipy.integrate import quad

from fowtctl.linearization import OMEGA, build_state_space
from fowtctl.study import seed_for
from fowtctl.tuning import BASELINE_SPEC, TransientSpec, pi_gains, rigid_platform_loop
from fowtctl.wind import (FLOOR, WindConfig, WindSeries, constant, load_csv, ntm_sigma, save_csv,
                          shaped_noise, shaping_spectrum, step_signal, synthesize, with_seed)


def test_constant_series():
    w = synthesize(WindConfig(11.4, kind="constant", duration=100.0))
    assert np.all(w.speed == 11.4)
    assert w.time[0] == 0 and w.time[-1] == pytest.approx(100.0)
    assert np.array_equal(constant(11.4, 100.0).speed, w.speed)


def test_ntm_sigma_example():
    assert ntm_sigma(18.0, 0.14) == pytest.approx(2.674, abs=1e-12)


def test_same_seed_is_bit_identical():
    cfg = WindConfig(18.0, seed=seed_for(2024, 18.0, 3), duration=600.0)
    assert np.array_equal(synthesize(cfg).speed, synthesize(cfg).speed)
    assert not np.array_equal(synthesize(cfg).speed, synthesize(with_seed(cfg, cfg.seed + 1)).speed)


@pytest.mark.parametrize("v", [12.0, 18.0, 24.0])
def test_sample_statistics(v):
    cfg = WindConfig(v, i_ref=0.14, seed=seed_for(2024, v, 0), duration=600.0)
    x = synthesize(cfg).speed
    assert np.mean(x) == pytest.approx(v, rel=0.01)
    assert np.std(x) == pytest.approx(cfg.sigma, rel=0.05)
    assert np.all(x >= FLOOR)


def test_floor_applies_at_extreme_turbulence():
    x = synthesize(WindConfig(2.0, i_ref=1.0, seed=7, duration=600.0)).speed
    assert x.min() == FLOOR


@settings(max_examples=25, deadline=None)
@given(v=st.floats(1.0, 30.0), i_ref=st.floats(0.0, 0.5), seed=st.integers(0, 2**64 - 1))
def test_never_below_floor(v, i_ref, seed):
    x = synthesize(WindConfig(v, i_ref=i_ref, seed=seed, duration=120.0)).speed
    assert np.all(x >= FLOOR) and np.all(np.isfinite(x))


def test_different_seeds_are_uncorrelated():
    # white innovations: ~12000 samples, correlation is tiny for every pair
    rng = [np.random.Generator(np.random.PCG64(seed_for(2024, 18.0, i))) for i in range(6)]
    noise = np.array([r.standard_normal(12001) for r in rng])
    c = np.corrcoef(noise)
    assert np.max(np.abs(c[np.triu_indices(6, 1)])) < 0.2
    # shaped series carry ~16 independent samples in 600 s, so the bound holds on the ensemble
    cfg = WindConfig(18.0, duration=600.0)
    r = [np.corrcoef(synthesize(with_seed(cfg, 2 * k)).speed, synthesize(with_seed(cfg, 2 * k + 1)).speed)[0, 1]
         for k in range(60)]
    assert np.mean(np.abs(r)) < 0.2
    assert abs(np.mean(r)) < 0.1


def test_shaped_noise_is_unit_variance_ar1(rng):
    x = shaped_noise(200000, 0.05, 20.0, rng)
    assert np.var(x) == pytest.approx(1.0, rel=0.05)
    lag1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert lag1 == pytest.approx(np.exp(-0.05 / 20.0), abs=2e-3)


def test_shaping_spectrum_integrates_to_variance():
    area, _ = quad(shaping_spectrum, -np.inf, np.inf, args=(2.0, 15.0))
    assert area == pytest.approx(4.0, rel=1e-9)


def test_periodogram_matches_shaping_filter():
    cfg = WindConfig(18.0, duration=800.0)
    spectra = []
    for s in range(50):
        f, p = signal.periodogram(synthesize(with_seed(cfg, s)).speed, fs=1 / cfg.dt, detrend="constant")
        spectra.append(p)
    omega = 2 * np.pi * f
    # one-sided per Hz -> two-sided per rad/s
    est = np.mean(spectra, axis=0) / (4 * np.pi)
    ref = shaping_spectrum(omega, cfg.sigma, cfg.time_constant)
    edges = np.geomspace(0.01, 1.0, 11)
    for lo, hi in zip(edges[:-1], edges[1:]):
        band = (omega >= lo) & (omega < hi)
        assert band.any()
        ratio_db = 10 * np.log10(est[band].mean() / ref[band].mean())
        assert abs(ratio_db) < 3.0


# ---- step signal ---------------------------------------------------------------------

def test_step_boundary():
    cfg = WindConfig(14.0, duration=100.0, kind="step", jump=2.0, t_jump=30.0)
    w = synthesize(cfg)
    k = int(np.flatnonzero(np.isclose(w.time, 30.0))[0])
    assert w.speed[k - 1] == 14.0 and w.speed[k] == 16.0
    assert np.all(w.speed[:k] == 14.0) and np.all(w.speed[k:] == 16.0)


def test_zero_jump_is_constant():
    cfg = WindConfig(14.0, duration=100.0)
    assert np.array_equal(step_signal(14.0, 0.0, 50.0, cfg).speed, constant(14.0, 100.0).speed)


def test_step_validation():
    cfg = WindConfig(14.0, duration=100.0)
    with pytest.raises(ValueError):
        step_signal(14.0, 1.0, 100.0, cfg)
    with pytest.raises(ValueError):
        WindConfig(14.0, kind="step", t_jump=0.0)


@pytest.mark.parametrize("k", [0, 6, 12])
def test_linear_step_response_damping(ref_ops, geom, platform, k):
    op = ref_ops[k]
    kp, ki = pi_gains(op, TransientSpec(*BASELINE_SPEC), geom)
    model = build_state_space(op, geom, platform)
    A = rigid_platform_loop(model, kp, ki)
    b = model.B[:2, 0]
    sys = signal.StateSpace(A, b[:, None], np.eye(2)[[OMEGA]], np.zeros((1, 1)))
    t = np.linspace(0, 80, 16001)
    _, y, _ = signal.lsim(sys, np.ones_like(t), t)
    peaks = signal.argrelextrema(y, np.greater)[0]
    troughs = signal.argrelextrema(y, np.less)[0]
    ratio = abs(y[troughs[0]]) / y[peaks[0]]
    d = -np.log(ratio)
    zeta = d / np.sqrt(np.pi**2 + d**2)
    assert zeta == pytest.approx(BASELINE_SPEC[1], rel=0.2)
    assert abs(y[-1]) < 1e-3 * y[peaks[0]]


# ---- validation and csv --------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(mean_speed=0.0), dict(dt=0.0), dict(duration=0.01),
                                dict(kind="gust"), dict(i_ref=-0.1)])
def test_config_validation(kw):
    args = dict(mean_speed=10.0)
    args.update(kw)
    with pytest.raises(ValueError):
        WindConfig(**args)


def test_csv_round_trip(tmp_path):
    w = synthesize(WindConfig(16.0, seed=3, duration=60.0))
    path = tmp_path / "wind.csv"
    save_csv(w, path)
    back = load_csv(path)
    assert np.allclose(back.speed, w.speed, rtol=1e-8, atol=0)
    assert np.allclose(back.time, w.time, rtol=1e-8, atol=0)


def test_csv_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,v\n0,1\n1,2\n")
    with pytest.raises(ValueError):
        load_csv(p)
    p.write_text("time,speed\n0,10\n0,11\n")
    with pytest.raises(ValueError):
        load_csv(p)
    p.write_text("time,speed\n0,10\n1,-1\n")
    with pytest.raises(ValueError):
        load_csv(p)


def test_series_interpolation():
    w = WindSeries(np.array([0.0, 1.0, 2.0]), np.array([10.0, 12.0, 11.0]))
    assert w.at(0.5) == 11.0 and w.at(5.0) == 11.0 and w.dt == 1.0
