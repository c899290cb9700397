import json
from dataclasses import replace

import numpy as np
import pytest

from fowtctl import config, study
from fowtctl.config import ConfigError, StudyConfig
from fowtctl.simulation import NormalizationError, SimConfig

SHORT = SimConfig(20.0, 5.0)


def short_cfg(tmp_path, **study_kw):
    kw = dict(speeds=(14.0,), seeds=1, variants=("Baseline",), out=str(tmp_path / "out"), reference_speed=14.0)
    kw.update(study_kw)
    return replace(config.ToolkitConfig(), simulation=SHORT, study=StudyConfig(**kw))


def read(path):
    return path.read_bytes()


# ---- config --------------------------------------------------------------------------

def test_defaults_give_78_runs_per_variant():
    s = StudyConfig()
    assert len(study.seed_table(s)) == 78
    assert s.variants == config.VARIANTS


def test_variant_aliases():
    assert config.canonical_variant("Comp-β") == "Comp-beta"
    assert config.canonical_variant("Comp-τg") == "Comp-tau"
    with pytest.raises(ConfigError, match="Comp-x"):
        config.canonical_variant("Comp-x")


@pytest.mark.parametrize("kw", [dict(speeds=()), dict(seeds=0), dict(variants=()),
                                dict(variants=("Baseline", "Baseline")), dict(workers=0),
                                dict(master_seed=-1)])
def test_study_config_validation(kw):
    with pytest.raises(ConfigError):
        StudyConfig(**kw)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="ratd_wind"):
        config.from_dict({"turbine": {"ratd_wind": 11.0}})
    with pytest.raises(ConfigError, match="stuff"):
        config.from_dict({"stuff": 1})
    with pytest.raises(ConfigError):
        config.from_dict({"platform": {"inertia": -1.0}})


def test_config_round_trip(tmp_path):
    cfg = config.from_dict({"platform": {"damping": 2e9}, "study": {"speeds": [12, 13], "seeds": 2},
                            "controller": {"corners": {"gen_speed": 1.5}}})
    assert cfg.platform.damping == 2e9 and cfg.study.speeds == (12.0, 13.0)
    assert cfg.controller.corners.gen_speed == 1.5
    path = tmp_path / "c.yaml"
    path.write_text(config.dump(cfg))
    assert config.load(path) == cfg


def test_config_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "c.yaml"
    path.write_text("study: {seeds: 3}\n")
    monkeypatch.setenv(config.ENV_VAR, str(path))
    assert config.load().study.seeds == 3
    monkeypatch.setenv(config.ENV_VAR, str(tmp_path / "missing.yaml"))
    with pytest.raises(ConfigError):
        config.load()


# ---- seeds ---------------------------------------------------------------------------

def test_seed_policy_is_stable_and_distinct():
    seeds = [s for _, _, s in study.seed_table(StudyConfig())]
    assert len(set(seeds)) == len(seeds)
    assert study.seed_for(2024, 12.0, 0) == study.seed_for(2024, 12, 0)
    assert study.seed_for(2024, 12.0, 0) != study.seed_for(2025, 12.0, 0)
    assert all(0 <= s < 2**64 for s in seeds)


# ---- variants ------------------------------------------------------------------------

def test_variant_matrix(controllers):
    assert controllers["Baseline"].compensation == "none"
    assert controllers["Detune"].detune == "detuned"
    assert controllers["Comp-beta"].compensation == "beta"
    assert controllers["Comp-tau"].compensation == "torque"
    assert controllers["Detune+Comp"].compensation == "dual"
    ptfm = controllers["Detune+Comp+Ptfm"]
    assert ptfm.use_platform_pid and ptfm.ballast_mode == "static"
    assert not controllers["Detune+Comp"].use_platform_pid


# ---- study runs ----------------------------------------------------------------------

def test_single_case_gives_one_row(tmp_path):
    cfg = short_cfg(tmp_path)
    summary = study.run_study(cfg)
    rows = study.read_csv(tmp_path / "out" / "runs.csv")
    assert len(rows) == 1 and summary["runs"] == 1 and summary["diverged"] == 0
    assert list(rows[0]) == list(study.RUN_COLUMNS)
    norm = json.loads((tmp_path / "out" / "normalization.json").read_text())
    assert float(norm["myt_reference"]) == pytest.approx(float(rows[0]["myt_mean"]), rel=1e-8)
    assert json.loads((tmp_path / "out" / "failures.json").read_text()) == []


def test_rerun_is_byte_identical_and_worker_independent(tmp_path):
    kw = dict(speeds=(13.0, 16.0), seeds=2, variants=("Baseline", "Detune+Comp"), reference_speed=13.0,
              batch_size=2)
    a = short_cfg(tmp_path / "a", **kw)
    b = short_cfg(tmp_path / "b", **kw)
    c = short_cfg(tmp_path / "c", workers=2, **kw)
    for cfg in (a, b, c):
        study.run_study(cfg)
    for name in ("runs.csv", "aggregate.csv", "comparison.csv", "seeds.csv", "normalization.json",
                 "fig_gains.csv", "fig_gen_speed.csv", "fig_tower.csv", "fig_power.csv"):
        assert read(tmp_path / "a" / "out" / name) == read(tmp_path / "b" / "out" / name)
        assert read(tmp_path / "a" / "out" / name) == read(tmp_path / "c" / "out" / name)
    text = (tmp_path / "a" / "out" / "runs.csv").read_text()
    assert "\r" not in text
    agg = study.read_csv(tmp_path / "a" / "out" / "aggregate.csv")
    assert len(agg) == 4 and list(agg[0]) == list(study.AGG_COLUMNS)


def test_normalization_reference_is_required(tmp_path):
    cfg = short_cfg(tmp_path, variants=("Detune+Comp",))
    with pytest.raises(NormalizationError, match="Baseline"):
        study.run_study(cfg)


def test_normalization_can_be_reused(tmp_path):
    study.run_study(short_cfg(tmp_path / "ref"))
    cfg = short_cfg(tmp_path, variants=("Detune+Comp",),
                    normalization=str(tmp_path / "ref" / "out" / "normalization.json"))
    assert study.run_study(cfg)["runs"] == 1


def test_compare_self_and_missing(tmp_path):
    cfg = short_cfg(tmp_path, variants=("Baseline", "Detune"))
    study.run_study(cfg)
    deltas, counts = study.compare("Baseline", "Baseline", cfg.study.out)
    assert deltas and all(r["delta"] == 0 and r["percent"] == 0 for r in deltas)
    assert set(counts) == {"Baseline"}
    deltas, _ = study.compare("Baseline", "Detune", cfg.study.out)
    assert {r["metric"] for r in deltas} == set(study.METRICS) | {"overspeed"}
    with pytest.raises(study.StudyError, match="Comp-Dual"):
        study.compare("Baseline", "Comp-Dual", cfg.study.out)
    with pytest.raises(study.StudyError):
        study.compare("Baseline", "Detune", tmp_path / "nowhere")


def test_mismatched_speed_grids():
    agg = [{"variant": "Baseline", "speed": 12.0}, {"variant": "Detune", "speed": 13.0}]
    with pytest.raises(study.StudyError, match="speed grids"):
        study.delta_rows(agg, "Baseline", "Detune")


def test_aggregate_statistics():
    rows = [{"variant": "Baseline", "speed": 12.0, "diverged": False, "overspeed_flag": k == 0,
             **{m: float(k + 1) for m in study.METRICS}} for k in range(3)]
    agg = study.aggregate(rows, ["Baseline"], [12.0])[0]
    assert agg["n_runs"] == 3 and agg["overspeed_count"] == 1
    assert agg["gen_speed_std_mean"] == 2.0 and agg["gen_speed_std_max"] == 3.0
    assert agg["gen_speed_std_std"] == pytest.approx(np.std([1.0, 2.0, 3.0]))


def test_divergence_is_recorded(tmp_path):
    study.run_study(short_cfg(tmp_path / "ref"))
    # almost no hydrostatic stiffness: the trim heel is far past 90 degrees
    cfg = short_cfg(tmp_path, normalization=str(tmp_path / "ref" / "out" / "normalization.json"))
    cfg = replace(cfg, platform=replace(cfg.platform, restoring=1e6))
    summary = study.run_study(cfg)
    assert summary["diverged"] == 1
    failures = json.loads((tmp_path / "out" / "failures.json").read_text())
    assert failures[0]["variant"] == "Baseline" and failures[0]["time"] == pytest.approx(0.02)
    row = study.read_csv(tmp_path / "out" / "runs.csv")[0]
    assert row["diverged"] == "1" and row["gen_speed_std"] == "nan"
