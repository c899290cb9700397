"""Controller-variant study: tuning, batched runs over (speed, seed), tables.

Output files (all ``%.9g``, ``\\n`` line endings, fixed column order):

``seeds.csv``          speed, seed_index, seed
``runs.csv``           one row per run, :data:`RUN_COLUMNS`
``aggregate.csv``      one row per (variant, speed), :data:`AGG_COLUMNS`
``comparison.csv``     each variant against Baseline, :data:`DELTA_COLUMNS`
``normalization.json`` tower-moment reference
``fig_gains.csv``      PI / compensation schedule per detuning kind
``fig_gen_speed.csv``, ``fig_tower.csv``, ``fig_power.csv``  per-figure extracts
``failures.json``      diverged runs (empty list when none)
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import controller as ctl
from .config import VARIANTS, StudyConfig, ToolkitConfig, canonical_variant
from .linearization import find_operating_point, tuning_speeds
from .simulation import (METRIC_CHANNELS, Normalization, NormalizationError, Plant, RunMetrics,
                         SimConfig, compute_metrics, integrate, static_ballast, window_mean)
from .tuning import (PlatformGains, build_gain_schedule, kw2_gain, tune_ballast,
                     tune_platform_pid)
from .wind import WindConfig, synthesize

METRICS = ("gen_speed_std", "gen_speed_max", "myt_std", "myt_max", "mean_power",
           "max_platform_pitch")
RUN_COLUMNS = ("variant", "speed", "seed_index", "seed", "diverged", "divergence_time",
               "myt_mean") + METRICS + ("overspeed_flag",)
AGG_COLUMNS = ("variant", "speed", "n_runs", "n_diverged", "overspeed_count") + tuple(
    f"{m}_{s}" for m in METRICS for s in ("mean", "std", "max"))
DELTA_COLUMNS = ("variant_a", "variant_b", "speed", "metric", "value_a", "value_b", "delta",
                 "percent")

# detuning kind, compensation mode, platform loops
VARIANT_SPECS = {
    "Baseline": ("baseline", "none", False),
    "Detune": ("detuned", "none", False),
    "Detune-Sched": ("scheduled", "none", False),
    "Comp-beta": ("baseline", "beta", False),
    "Comp-tau": ("baseline", "torque", False),
    "Comp-Dual": ("baseline", "dual", False),
    "Detune+Comp": ("scheduled", "dual", False),
    "Detune+Comp+Ptfm": ("scheduled", "dual", True),
}


class StudyError(RuntimeError):
    pass


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plant_from(cfg: ToolkitConfig) -> Plant:
    return Plant(cfg.turbine, cfg.surface.build(), cfg.platform, cfg.actuators, cfg.tower_share)


def operating_points(plant: Plant, spacing=0.5):
    return [find_operating_point(plant.geom, plant.surface, plant.platform, v)
            for v in tuning_speeds(plant.geom, spacing)]


def build_controller(variant, plant: Plant, cfg: ToolkitConfig, ops=None) -> ctl.ControllerConfig:
    """Controller configuration for one named variant."""
    variant = canonical_variant(variant)
    detune, comp, platform_loops = VARIANT_SPECS[variant]
    cs = cfg.controller
    if ops is None:
        ops = operating_points(plant, cs.tuning_spacing)
    tau_g_max = cs.tau_g_max_ratio * plant.geom.rated_gen_torque
    schedule = build_gain_schedule(ops, plant.geom, plant.platform, detune, comp, cs.m_beta,
                                   cs.phi_dot_max, tau_g_max)
    gains = PlatformGains()
    ballast_mode = "off"
    if platform_loops:
        pid = tune_platform_pid(plant.platform, cs.pid_bandwidth, cs.pid_zeta)
        ki, cutoff = tune_ballast(plant.platform, cs.ballast_settle_time)
        gains = replace(pid, ballast_ki=ki, ballast_filter_cutoff=cutoff)
        ballast_mode = cs.ballast_mode
    return ctl.ControllerConfig.from_geometry(
        schedule, plant.geom, kw2_gain(plant.geom, plant.surface), tau_g_max=tau_g_max,
        platform_gains=gains, compensation=comp, detune=detune,
        use_platform_pid=platform_loops, ballast_mode=ballast_mode, corners=cs.corners,
        tau_p_max=plant.actuators.tau_p_max, region2_band=cs.region2_band, dt_ctrl=cs.dt_ctrl)


def seed_for(master_seed, speed, seed_index) -> int:
    """64-bit turbulence seed from a (master, speed, index) counter key."""
    ss = np.random.SeedSequence([int(master_seed), int(round(float(speed) * 1000)), int(seed_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def seed_table(study: StudyConfig):
    return [(v, i, seed_for(study.master_seed, v, i)) for v in study.speeds for i in range(study.seeds)]


@dataclass(frozen=True)
class Job:
    variant: str
    cases: tuple  # (speed, seed_index, seed)


def _wind_for(cfg: ToolkitConfig, speed, seed, duration):
    w = cfg.wind
    return synthesize(WindConfig(speed, i_ref=w.i_ref, seed=seed, dt=w.dt, duration=duration,
                                 length_scale=w.length_scale))


def run_batch(cfg: ToolkitConfig, variant, cases, plant=None, ops=None, sim: SimConfig = None):
    """Simulate ``cases`` for one variant; returns raw per-run results (myt unnormalized)."""
    plant = plant_from(cfg) if plant is None else plant
    sim = cfg.simulation if sim is None else sim
    controller = build_controller(variant, plant, cfg, ops)
    winds = [_wind_for(cfg, v, s, sim.duration) for v, _, s in cases]
    ballast = 0.0
    if controller.use_platform_pid and controller.ballast_mode == "static":
        ballast = np.array([static_ballast(plant, v) for v, _, _ in cases])
    res = integrate(plant, controller, winds, sim, ballast=ballast, channels=METRIC_CHANNELS,
                    v_trim=[v for v, _, _ in cases])
    unit = Normalization(1.0)
    out = []
    for i, (v, k, s) in enumerate(cases):
        row = {"variant": variant, "speed": v, "seed_index": k, "seed": s,
               "diverged": bool(res.diverged[i]), "divergence_time": res.divergence_time[i]}
        if res.diverged[i]:
            row.update({m: np.nan for m in METRICS}, myt_mean=np.nan, overspeed_flag=False)
        else:
            run = res.run(i)
            met = compute_metrics(run, res.time, sim, unit, plant.geom.rated_gen_speed)
            row.update({m: getattr(met, m) for m in METRICS}, overspeed_flag=met.overspeed_flag,
                       myt_mean=window_mean(run, res.time, sim))
        out.append(row)
    return out


def _run_job(args):
    cfg, job = args
    return run_batch(cfg, job.variant, job.cases)


def _jobs(study: StudyConfig, variants, cases):
    jobs = []
    for variant in variants:
        for i in range(0, len(cases), study.batch_size):
            jobs.append(Job(variant, tuple(cases[i:i + study.batch_size])))
    return jobs


def _execute(cfg, jobs, workers, plant, ops):
    if workers <= 1 or len(jobs) <= 1:
        return [run_batch(cfg, j.variant, j.cases, plant, ops) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, [(cfg, j) for j in jobs]))


def normalize_rows(rows, norm: Normalization):
    ref = abs(norm.myt_reference)
    for r in rows:
        r["myt_std"] = r["myt_std"] / ref
        r["myt_max"] = r["myt_max"] / ref
    return rows


def aggregate(rows, variants, speeds):
    agg = []
    for variant in variants:
        for v in speeds:
            sel = [r for r in rows if r["variant"] == variant and r["speed"] == v]
            ok = [r for r in sel if not r["diverged"]]
            row = {"variant": variant, "speed": v, "n_runs": len(sel),
                   "n_diverged": len(sel) - len(ok),
                   "overspeed_count": sum(bool(r["overspeed_flag"]) for r in ok)}
            for m in METRICS:
                x = np.array([r[m] for r in ok], dtype=float)
                if x.size:
                    row.update({f"{m}_mean": np.mean(x), f"{m}_std": np.std(x), f"{m}_max": np.max(x)})
                else:
                    row.update({f"{m}_mean": np.nan, f"{m}_std": np.nan, f"{m}_max": np.nan})
            agg.append(row)
    return agg


def delta_rows(agg, variant_a, variant_b):
    a = {r["speed"]: r for r in agg if r["variant"] == variant_a}
    b = {r["speed"]: r for r in agg if r["variant"] == variant_b}
    for name, d in ((variant_a, a), (variant_b, b)):
        if not d:
            raise StudyError(f"variant {name!r} is not present in the study outputs")
    if sorted(a) != sorted(b):
        raise StudyError(f"speed grids of {variant_a!r} and {variant_b!r} differ")
    out = []
    for v in sorted(a):
        for m in METRICS + ("overspeed",):
            key = "overspeed_count" if m == "overspeed" else f"{m}_mean"
            va, vb = float(a[v][key]), float(b[v][key])
            delta = vb - va
            pct = 100.0 * delta / abs(va) if va != 0 else (0.0 if delta == 0 else np.nan)
            out.append({"variant_a": variant_a, "variant_b": variant_b, "speed": v,
                        "metric": m, "value_a": va, "value_b": vb, "delta": delta, "percent": pct})
    return out


def _agg_from_csv(path):
    rows = read_csv(path)
    for r in rows:
        for k, val in r.items():
            if k != "variant":
                r[k] = float(val)
    return rows


def compare(variant_a, variant_b, out_dir):
    """Per-speed deltas (b - a) from a finished study directory, plus overspeed totals."""
    p = Path(out_dir) / "aggregate.csv"
    if not p.exists():
        raise StudyError(f"no aggregate.csv in {out_dir}; run a study first")
    agg = _agg_from_csv(p)
    a, b = canonical_variant(variant_a), canonical_variant(variant_b)
    deltas = delta_rows(agg, a, b)
    counts = {name: int(sum(r["overspeed_count"] for r in agg if r["variant"] == name)) for name in (a, b)}
    return deltas, counts


def write_figures(out: Path, agg, cfg: ToolkitConfig, plant: Plant, ops):
    rows = []
    for kind in ("baseline", "detuned", "scheduled"):
        sch = build_gain_schedule(ops, plant.geom, plant.platform, kind, "dual",
                                  cfg.controller.m_beta, cfg.controller.phi_dot_max,
                                  cfg.controller.tau_g_max_ratio * plant.geom.rated_gen_torque)
        for i in range(sch.index.size):
            rows.append({"kind": kind, "v_bar": sch.v_bar[i], "beta_bar": sch.index[i],
                         "kp": sch.kp[i], "ki": sch.ki[i], "omega_pi": sch.omega_pi[i],
                         "zeta_pi": sch.zeta_pi[i], "kc_beta": sch.kc_beta[i],
                         "kc_tau_g": sch.kc_tau_g[i], "m_beta": sch.m_beta[i],
                         "m_tau_g": sch.m_tau_g[i]})
    write_csv(out / "fig_gains.csv", ("kind", "v_bar", "beta_bar", "kp", "ki", "omega_pi", "zeta_pi",
                                      "kc_beta", "kc_tau_g", "m_beta", "m_tau_g"), rows)
    picks = {"fig_gen_speed.csv": ("gen_speed_std", "gen_speed_max"),
             "fig_tower.csv": ("myt_std", "myt_max", "max_platform_pitch"),
             "fig_power.csv": ("mean_power",)}
    for name, metrics in picks.items():
        cols = ("variant", "speed") + tuple(f"{m}_{s}" for m in metrics for s in ("mean", "std"))
        if name == "fig_gen_speed.csv":
            cols = cols + ("overspeed_count",)
        write_csv(out / name, cols, agg)


def run_study(cfg: ToolkitConfig, study: StudyConfig | None = None, progress=None):
    """Run the full matrix, write every table to ``study.out``; returns a summary dict."""
    study = cfg.study if study is None else study
    out = Path(study.out)
    out.mkdir(parents=True, exist_ok=True)
    plant = plant_from(cfg)
    ops = operating_points(plant, cfg.controller.tuning_spacing)
    cases = seed_table(study)
    write_csv(out / "seeds.csv", ("speed", "seed_index", "seed"),
              [{"speed": v, "seed_index": i, "seed": s} for v, i, s in cases])

    variants = [v for v in VARIANTS if v in study.variants]
    # Baseline first so the tower-moment reference exists before anything is normalized
    jobs = _jobs(study, variants, cases)
    rows = []
    if study.workers > 1:
        batches = _execute(cfg, jobs, study.workers, plant, ops)
    else:
        batches = (run_batch(cfg, j.variant, j.cases, plant, ops) for j in jobs)
    for job, batch in zip(jobs, batches):
        if progress is not None:
            progress(job, batch)
        rows.extend(batch)

    norm = _normalization(rows, study, out)
    normalize_rows(rows, norm)
    write_csv(out / "runs.csv", RUN_COLUMNS, rows)
    agg = aggregate(rows, variants, study.speeds)
    write_csv(out / "aggregate.csv", AGG_COLUMNS, agg)
    deltas = []
    if "Baseline" in variants:
        for v in variants:
            if v != "Baseline":
                deltas.extend(delta_rows(agg, "Baseline", v))
    write_csv(out / "comparison.csv", DELTA_COLUMNS, deltas)
    write_figures(out, agg, cfg, plant, ops)
    failures = [{"variant": r["variant"], "speed": r["speed"], "seed_index": r["seed_index"],
                 "seed": r["seed"], "time": float(r["divergence_time"])}
                for r in rows if r["diverged"]]
    (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n")
    return {"runs": len(rows), "diverged": len(failures), "out": str(out),
            "normalization": norm.myt_reference, "rows": rows, "aggregate": agg}


def _normalization(rows, study: StudyConfig, out: Path) -> Normalization:
    ref = [r for r in rows if r["variant"] == "Baseline" and r["speed"] == study.reference_speed
           and not r["diverged"]]
    if ref:
        norm = Normalization(float(np.mean([r["myt_mean"] for r in ref])), study.reference_speed, len(ref))
        norm.save(out / "normalization.json")
        return norm
    path = Path(study.normalization) if study.normalization else out / "normalization.json"
    try:
        return Normalization.load(path)
    except NormalizationError as exc:
        raise NormalizationError(f"{exc} (no Baseline runs at {study.reference_speed} m/s in "
                                 "this study)") from exc
