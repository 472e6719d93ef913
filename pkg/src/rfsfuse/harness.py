"""Monte Carlo experiment orchestration and CSV persistence.

run_experiment drives, per run and step, the predict/update loop of every
sensor, the fusion event dictated by the cooperation mode, extraction, and
OSPA scoring against the truth.  When a fit-iteration sweep is configured
the experiment evaluates every requested iteration count plus the
noncooperative and CC-only baselines on identical measurement streams.

Outputs are two CSVs: a per-step table

    run,step,sensor,filter_kind,mode,t_fit,ospa,ospa_loc,ospa_card,n_est,n_true

and an aggregate table

    mode,t_fit,sensor,filter_kind,mean_ospa,mean_loc,mean_card,mean_fusion_time_ns

plus an optional fusion-diagnostics CSV (one row per sensor and fit
iteration of every fusion event).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import filters
from .fusion import FusionConfig, fuse_once, uniform_config
from .metrics import ospa
from .models import make_cv_model, make_linear_sensor, make_mb_birth, make_range_bearing_sensor
from .scenario import (
    ScenarioConfig,
    TargetSchedule,
    default_targets,
    generate_measurements,
    generate_truth,
    measurement_stream,
    truth_positions,
)

MODES = ("noncooperative", "cc_only", "fit")

PER_STEP_HEADER = "run,step,sensor,filter_kind,mode,t_fit,ospa,ospa_loc,ospa_card,n_est,n_true"
AGGREGATE_HEADER = "mode,t_fit,sensor,filter_kind,mean_ospa,mean_loc,mean_card,mean_fusion_time_ns"
DIAGNOSTICS_HEADER = "run,step,sensor,iteration,isd,alpha,elapsed_ns"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    filter_assignment: tuple[str, ...]
    fusion: FusionConfig
    mode: str = "fit"
    fit_iteration_sweep: tuple[int, ...] = ()
    ospa_cutoff: float = 100.0
    ospa_order: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "filter_assignment", tuple(self.filter_assignment))
        object.__setattr__(self, "fit_iteration_sweep", tuple(self.fit_iteration_sweep))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.filter_assignment) != len(self.scenario.sensors):
            raise ValueError(
                f"{len(self.filter_assignment)} filters for "
                f"{len(self.scenario.sensors)} sensors"
            )


@dataclass
class ResultTable:
    per_step: list = field(default_factory=list)
    aggregate: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def result_groups(config: ExperimentConfig) -> list[tuple[str, int]]:
    """(mode, t_fit) variants the experiment evaluates."""
    if config.fit_iteration_sweep:
        groups = [("noncooperative", 0), ("cc_only", 0)]
        groups.extend(("fit", t) for t in config.fit_iteration_sweep)
        return groups
    t_fit = config.fusion.t_max if config.mode == "fit" else 0
    return [(config.mode, t_fit)]


def _group_fusion_config(config: ExperimentConfig, mode: str, t_fit: int) -> FusionConfig | None:
    if mode == "noncooperative":
        return None
    if mode == "cc_only":
        return replace(config.fusion, fit_enabled=False, cc_enabled=True)
    # t_fit is the controlled variable of a fit group: run exactly that many
    # sweeps, with the convergence shortcut disabled
    return replace(config.fusion, fit_enabled=True, t_max=t_fit, conv_threshold=0.0)


def _simulate_one_run(config, mode, t_fit, run, truth, meas_cache):
    """One Monte Carlo run of one (mode, t_fit) group; returns row lists."""
    scenario = config.scenario
    fusion_cfg = _group_fusion_config(config, mode, t_fit)
    states = [filters.make_filter_state(kind) for kind in config.filter_assignment]
    rows, diag_rows = [], []
    for k in range(1, scenario.duration + 1):
        for s, sensor in enumerate(scenario.sensors):
            if (s, k) not in meas_cache:
                rng = measurement_stream(scenario.seed, run, s, k)
                meas_cache[(s, k)] = generate_measurements(truth[k - 1], sensor, rng)
            states[s] = filters.predict(states[s], scenario.motion, scenario.birth_model)
            states[s] = filters.update(states[s], meas_cache[(s, k)], sensor)
        fusion_ns = 0
        if fusion_cfg is not None:
            result = fuse_once(states, fusion_cfg)
            states = list(result.states)
            fusion_ns = result.elapsed_ns
            for d in result.diagnostics:
                diag_rows.append((run, k, d.sensor, d.iteration, d.isd, d.alpha, d.elapsed_ns))
        truth_pos = truth_positions(truth[k - 1])
        for s in range(len(scenario.sensors)):
            estimates = filters.extract(states[s])
            est_pos = np.array([[x[0], x[2]] for x in estimates]).reshape(-1, 2)
            score = ospa(est_pos, truth_pos, config.ospa_cutoff, config.ospa_order)
            rows.append(
                (
                    run,
                    k,
                    s,
                    config.filter_assignment[s],
                    mode,
                    t_fit,
                    score.total,
                    score.loc,
                    score.card,
                    len(estimates),
                    len(truth_pos),
                    fusion_ns,
                )
            )
    return rows, diag_rows


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Evaluate every result group over the scenario's Monte Carlo runs."""
    scenario = config.scenario
    truth = generate_truth(scenario)
    table = ResultTable()
    raw_rows = []
    for mode, t_fit in result_groups(config):
        for run in range(scenario.runs):
            meas_cache: dict = {}
            try:
                rows, diag_rows = _simulate_one_run(config, mode, t_fit, run, truth, meas_cache)
            except Exception as exc:  # noqa: BLE001 - a broken run is data, not a crash
                table.errors.append((mode, t_fit, run, f"{type(exc).__name__}: {exc}"))
                continue
            raw_rows.extend(rows)
            table.diagnostics.extend(diag_rows)
    table.per_step = [row[:11] for row in raw_rows]
    table.aggregate = _aggregate(raw_rows, config)
    return table


def _aggregate(raw_rows, config: ExperimentConfig) -> list:
    groups: dict = {}
    for row in raw_rows:
        key = (row[4], row[5], row[2], row[3])  # mode, t_fit, sensor, filter_kind
        groups.setdefault(key, []).append(row)
    out = []
    for mode, t_fit in result_groups(config):
        for s in range(len(config.scenario.sensors)):
            key = (mode, t_fit, s, config.filter_assignment[s])
            rows = groups.get(key, [])
            if not rows:
                continue
            mean_ospa = float(np.mean([r[6] for r in rows]))
            mean_loc = float(np.mean([r[7] for r in rows]))
            mean_card = float(np.mean([r[8] for r in rows]))
            mean_fusion = float(np.mean([r[11] for r in rows]))
            out.append((mode, t_fit, s, key[3], mean_ospa, mean_loc, mean_card, mean_fusion))
    return out


def grand_mean_ospa(table: ResultTable, mode: str, t_fit: int) -> float:
    """Run- and step-averaged OSPA over all sensors of one result group."""
    vals = [r[4] for r in table.aggregate if r[0] == mode and r[1] == t_fit]
    if not vals:
        raise ValueError(f"no aggregate rows for mode={mode!r}, t_fit={t_fit}")
    return float(np.mean(vals))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_results(table: ResultTable, out_dir: str) -> tuple[str, str]:
    """Write the per-step and aggregate CSVs; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    per_step_path = os.path.join(out_dir, "per_step.csv")
    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    _write_csv(per_step_path, PER_STEP_HEADER, table.per_step)
    _write_csv(aggregate_path, AGGREGATE_HEADER, table.aggregate)
    return per_step_path, aggregate_path


def write_diagnostics(table: ResultTable, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "fusion_diagnostics.csv")
    _write_csv(path, DIAGNOSTICS_HEADER, table.diagnostics)
    return path


# ------------------------------------------------------------- JSON config


def _sensor_from_dict(d: dict):
    kind = d.get("kind", "linear")
    if kind == "linear":
        return make_linear_sensor(
            noise_std=d.get("noise_std", 10.0),
            detection=d.get("detection", 0.9),
            clutter_rate=d.get("clutter_rate", 10.0),
            fov=tuple(d.get("fov", (-1000.0, 1000.0, -1000.0, 1000.0))),
        )
    if kind == "range_bearing":
        return make_range_bearing_sensor(
            position=d["position"],
            range_std=d.get("range_std", 10.0),
            bearing_std=d.get("bearing_std", np.pi / 90.0),
            detection=d.get("detection", 0.9),
            clutter_rate=d.get("clutter_rate", 10.0),
            fov_radius=d.get("fov_radius", 2000.0),
        )
    raise ValueError(f"unknown sensor kind {kind!r}")


def scenario_from_dict(d: dict) -> ScenarioConfig:
    motion_d = d.get("motion", {})
    motion = make_cv_model(
        step=motion_d.get("step", 1.0),
        survival=motion_d.get("survival", 0.95),
        noise_intensity=motion_d.get("noise_intensity", 25.0),
    )
    birth_d = d.get("birth", {})
    sites = tuple(tuple(s) for s in birth_d.get(
        "sites", ((0.0, 0.0), (400.0, -600.0), (-800.0, -200.0), (-200.0, 800.0))
    ))
    birth = make_mb_birth(
        sites,
        existence=birth_d.get("existence", 0.03),
        std=birth_d.get("std", (10.0, 10.0, 10.0, 10.0)),
    )
    targets_d = d.get("targets", "default")
    if targets_d == "default":
        targets = default_targets(sites)
    else:
        targets = tuple(
            TargetSchedule(t["birth_step"], t["death_step"], np.asarray(t["state"], dtype=float))
            for t in targets_d
        )
    return ScenarioConfig(
        roi=tuple(d.get("roi", (-1000.0, 1000.0, -1000.0, 1000.0))),
        duration=d.get("duration", 100),
        targets=targets,
        motion=motion,
        birth_model=birth,
        sensors=tuple(_sensor_from_dict(s) for s in d["sensors"]),
        seed=d.get("seed", 20240601),
        runs=d.get("runs", 20),
    )


def experiment_from_dict(d: dict) -> ExperimentConfig:
    scenario = scenario_from_dict(d["scenario"])
    fusion_d = dict(d.get("fusion", {}))
    weights = fusion_d.pop("weights", "uniform")
    if weights == "uniform":
        fusion = uniform_config(len(scenario.sensors), **fusion_d)
    else:
        fusion = FusionConfig(fusion_weights=tuple(weights), **fusion_d)
    return ExperimentConfig(
        scenario=scenario,
        filter_assignment=tuple(d.get("filters", ("phd",) * len(scenario.sensors))),
        fusion=fusion,
        mode=d.get("mode", "fit"),
        fit_iteration_sweep=tuple(d.get("fit_iteration_sweep", ())),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return experiment_from_dict(json.load(fh))
