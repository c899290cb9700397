"""Command-line driver: ``fowtctl {tune,linearize,simulate,batch,compare}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .fowt_model import DivergenceError
from .linearization import (PITCH, build_state_space, find_operating_point, has_rhp_zero,
                            nmpz_boundary, spectral_abscissa, transmission_zeros)
from .simulation import (Normalization, NormalizationError, compute_metrics, integrate,
                         static_ballast, write_timeseries_csv)
from .study import (DELTA_COLUMNS, StudyError, build_controller, compare, operating_points,
                    plant_from, run_study, seed_for, write_csv, write_figures)
from .tuning import closed_loop_matrix, tune_ballast, tune_platform_pid
from .wind import WindConfig, synthesize


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _names(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config (default: ${config_mod.ENV_VAR})")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seeds", type=int, help="seeds per wind speed")
    common.add_argument("--master-seed", type=int, help="unsigned 64-bit master seed")
    common.add_argument("--variants", type=_names, help="comma-separated controller variants")
    common.add_argument("--speeds", type=_floats, help="comma-separated mean wind speeds (m/s)")
    common.add_argument("--workers", type=int, help="worker processes")

    p = argparse.ArgumentParser(prog="fowtctl", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("tune", parents=[common], help="write gain schedules and platform gains")
    sub.add_parser("linearize", parents=[common], help="linear models, zeros and stability per speed")
    s = sub.add_parser("simulate", parents=[common], help="one closed-loop run with a time-series CSV")
    s.add_argument("--variant", default="Baseline")
    s.add_argument("--speed", type=float, default=12.0)
    s.add_argument("--seed-index", type=int, default=0)
    s.add_argument("--duration", type=float)
    sub.add_parser("batch", parents=[common], help="full study matrix")
    c = sub.add_parser("compare", parents=[common], help="per-speed deltas between two variants")
    c.add_argument("variant_a")
    c.add_argument("variant_b")
    return p


def _resolve(args):
    cfg = config_mod.load(args.config)
    study = cfg.study
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.master_seed is not None:
        changes["master_seed"] = args.master_seed
    if args.variants is not None:
        changes["variants"] = tuple(args.variants)
    if args.speeds is not None:
        changes["speeds"] = tuple(args.speeds)
    if args.workers is not None:
        changes["workers"] = args.workers
    study = replace(study, **changes)
    return replace(cfg, study=study)


def cmd_tune(cfg):
    out = Path(cfg.study.out)
    out.mkdir(parents=True, exist_ok=True)
    plant = plant_from(cfg)
    ops = operating_points(plant, cfg.controller.tuning_spacing)
    write_figures(out, [], cfg, plant, ops)
    pid = tune_platform_pid(plant.platform, cfg.controller.pid_bandwidth, cfg.controller.pid_zeta)
    ki, cutoff = tune_ballast(plant.platform, cfg.controller.ballast_settle_time)
    gains = {"pid_kp": pid.pid_kp, "pid_ki": pid.pid_ki, "pid_kd": pid.pid_kd,
             "ballast_ki": ki, "ballast_filter_cutoff": cutoff}
    (out / "platform_gains.json").write_text(json.dumps(gains, indent=2) + "\n")
    for name in ("fig_gen_speed.csv", "fig_tower.csv", "fig_power.csv"):
        (out / name).unlink(missing_ok=True)
    print(f"gain schedules -> {out / 'fig_gains.csv'}; platform gains -> {out / 'platform_gains.json'}")
    return 0


def cmd_linearize(cfg):
    out = Path(cfg.study.out)
    out.mkdir(parents=True, exist_ok=True)
    plant = plant_from(cfg)
    ops = operating_points(plant, cfg.controller.tuning_spacing)
    variants = [v for v in config_mod.VARIANTS if v in cfg.study.variants]
    schedules = {v: build_controller(v, plant, cfg, ops).schedule for v in variants}
    rows = []
    for v in cfg.study.speeds:
        op = find_operating_point(plant.geom, plant.surface, plant.platform, v)
        model = build_state_space(op, plant.geom, plant.platform)
        zeros = transmission_zeros(model, PITCH)
        row = {"speed": v, "beta_bar": op.beta_bar, "phi_bar": op.phi_bar, "nmpz": model.nmpz,
               "rhp_zero": has_rhp_zero(zeros),
               "max_zero_real": float(np.max(zeros.real)) if zeros.size else float("nan")}
        for i in range(4):
            for j in range(4):
                row[f"A{i + 1}{j + 1}"] = model.A[i, j]
                row[f"B{i + 1}{j + 1}"] = model.B[i, j]
        for name, sch in schedules.items():
            kp, ki, kb, kt = sch.lookup(op.beta_bar)
            row[f"abscissa_{name}"] = spectral_abscissa(closed_loop_matrix(model, kp, ki, kb, kt))
        rows.append(row)
    cols = (["speed", "beta_bar", "phi_bar", "nmpz", "rhp_zero", "max_zero_real"]
            + [f"A{i}{j}" for i in range(1, 5) for j in range(1, 5)]
            + [f"B{i}{j}" for i in range(1, 5) for j in range(1, 5)]
            + [f"abscissa_{n}" for n in schedules])
    write_csv(out / "linear_models.csv", cols, rows)
    boundary = nmpz_boundary(ops, plant.platform)
    print(f"linear models -> {out / 'linear_models.csv'}")
    print("NMPZ boundary: " + ("none above rated" if boundary is None else f"{boundary:g} m/s"))
    return 0


def cmd_simulate(cfg, variant, speed, seed_index, duration):
    out = Path(cfg.study.out)
    out.mkdir(parents=True, exist_ok=True)
    plant = plant_from(cfg)
    sim = cfg.simulation if duration is None else replace(cfg.simulation, duration=duration)
    ctrl = build_controller(variant, plant, cfg)
    seed = seed_for(cfg.study.master_seed, speed, seed_index)
    w = cfg.wind
    wind = synthesize(WindConfig(speed, i_ref=w.i_ref, seed=seed, dt=w.dt, duration=sim.duration,
                                 length_scale=w.length_scale))
    ballast = static_ballast(plant, speed) if ctrl.use_platform_pid and ctrl.ballast_mode == "static" else 0.0
    res = integrate(plant, ctrl, [wind], sim, ballast=ballast, v_trim=[speed])
    tag = f"{config_mod.canonical_variant(variant)}_{speed:g}_{seed_index}"
    write_timeseries_csv(res, 0, out / f"timeseries_{tag}.csv")
    if res.diverged[0]:
        print(f"run diverged at t = {res.divergence_time[0]:.3f} s", file=sys.stderr)
        return 2
    try:
        norm = Normalization.load(Path(cfg.study.normalization or out / "normalization.json"))
    except NormalizationError as exc:
        print(f"time series written; metrics skipped: {exc}", file=sys.stderr)
        return 0
    met = compute_metrics(res.run(0), res.time, sim, norm, plant.geom.rated_gen_speed)
    print(json.dumps({k: getattr(met, k) for k in met.FIELDS}, indent=2))
    return 0


def cmd_batch(cfg):
    def progress(job, batch):
        print(f"{job.variant}: {len(batch)} runs", file=sys.stderr)
    summary = run_study(cfg, progress=progress)
    print(f"{summary['runs']} runs, {summary['diverged']} diverged -> {summary['out']}")
    return 0 if summary["diverged"] == 0 else 1


def cmd_compare(cfg, a, b):
    deltas, counts = compare(a, b, cfg.study.out)
    out = Path(cfg.study.out) / f"compare_{config_mod.canonical_variant(a)}_vs_{config_mod.canonical_variant(b)}.csv"
    write_csv(out, DELTA_COLUMNS, deltas)
    for r in deltas:
        if r["metric"] in ("gen_speed_std", "myt_std", "mean_power"):
            print(f"{r['speed']:5g} {r['metric']:14s} {r['value_a']:.6g} -> {r['value_b']:.6g} ({r['percent']:+.2f}%)")
    print("overspeed flags: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "tune":
            return cmd_tune(cfg)
        if args.command == "linearize":
            return cmd_linearize(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.variant, args.speed, args.seed_index, args.duration)
        if args.command == "batch":
            return cmd_batch(cfg)
        return cmd_compare(cfg, args.variant_a, args.variant_b)
    except (config_mod.ConfigError, StudyError, NormalizationError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
