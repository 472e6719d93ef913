"""Ground-truth generation and per-sensor measurement synthesis.

The default scenario covers a 2 km x 2 km region watched by four sensors
for 100 steps.  Twelve targets appear in staggered waves of four (one per
birth site) at steps 1, 11 and 21 and die at steps 71, 81 and 91, so all
twelve are present between steps 21 and 70.  Truth propagates noiselessly
through the constant-velocity transition; only the filters assume process
noise.

Randomness is counter-based: every (run, sensor, step) triple owns an
independent generator derived from the experiment seed, so runs are
reproducible bit-for-bit and reordering or parallelizing sensors cannot
change anyone else's measurement sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    BirthModel,
    MotionModel,
    SensorModel,
    in_fov,
    make_cv_model,
    make_linear_sensor,
    make_mb_birth,
    make_range_bearing_sensor,
    range_bearing,
)

BIRTH_SITES = ((0.0, 0.0), (400.0, -600.0), (-800.0, -200.0), (-200.0, 800.0))

# (site, birth step, death step, velocity); speeds stay below 15 m/s and the
# noiseless trajectories remain inside the region for the whole lifetime
_DEFAULT_TRACKS = (
    (0, 1, 71, (10.0, 5.0)),
    (1, 1, 71, (-12.0, 8.0)),
    (2, 1, 71, (13.0, 6.0)),
    (3, 1, 71, (5.0, -13.0)),
    (0, 11, 81, (-8.0, -11.0)),
    (1, 11, 81, (3.0, 14.0)),
    (2, 11, 81, (11.0, -7.0)),
    (3, 11, 81, (-9.0, -10.0)),
    (0, 21, 91, (13.0, -4.0)),
    (1, 21, 91, (-14.0, 2.0)),
    (2, 21, 91, (10.0, 11.0)),
    (3, 21, 91, (2.0, -14.0)),
)


class ScenarioError(ValueError):
    """Scenario configuration violates its invariants."""


@dataclass(frozen=True)
class TargetSchedule:
    """One target: alive for birth_step <= k < death_step from initial_state."""

    birth_step: int
    death_step: int
    initial_state: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "initial_state", np.asarray(self.initial_state, dtype=float).reshape(-1)
        )


@dataclass(frozen=True)
class ScenarioConfig:
    roi: tuple[float, float, float, float]
    duration: int
    targets: tuple[TargetSchedule, ...]
    motion: MotionModel
    birth_model: BirthModel
    sensors: tuple[SensorModel, ...]
    seed: int
    runs: int

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.runs < 1:
            raise ScenarioError("runs must be >= 1")
        if self.duration < 1:
            raise ScenarioError("duration must be >= 1")
        xmin, xmax, ymin, ymax = self.roi
        for t in self.targets:
            if not t.birth_step < t.death_step <= self.duration:
                raise ScenarioError(
                    f"need birth < death <= duration, got ({t.birth_step}, {t.death_step})"
                )
            x = t.initial_state.copy()
            for _ in range(t.birth_step, t.death_step):
                if not (xmin <= x[0] <= xmax and ymin <= x[2] <= ymax):
                    raise ScenarioError(
                        f"target born at step {t.birth_step} leaves the region at "
                        f"({x[0]:.0f}, {x[2]:.0f})"
                    )
                x = self.motion.transition @ x


def default_targets(sites=BIRTH_SITES) -> tuple[TargetSchedule, ...]:
    out = []
    for site, birth, death, (vx, vy) in _DEFAULT_TRACKS:
        px, py = sites[site]
        out.append(TargetSchedule(birth, death, np.array([px, vx, py, vy])))
    return tuple(out)


def default_scenario(
    sensor_kind: str = "linear", seed: int = 20240601, runs: int = 20
) -> ScenarioConfig:
    """The benchmark scenario with four linear or four range-bearing sensors."""
    if sensor_kind == "linear":
        sensors = tuple(make_linear_sensor() for _ in range(4))
    elif sensor_kind == "range_bearing":
        positions = ((-500.0, -800.0), (-500.0, 800.0), (600.0, 800.0), (600.0, -800.0))
        sensors = tuple(make_range_bearing_sensor(p) for p in positions)
    else:
        raise ScenarioError(f"unknown sensor kind {sensor_kind!r}")
    return ScenarioConfig(
        roi=(-1000.0, 1000.0, -1000.0, 1000.0),
        duration=100,
        targets=default_targets(),
        motion=make_cv_model(),
        birth_model=make_mb_birth(BIRTH_SITES),
        sensors=sensors,
        seed=seed,
        runs=runs,
    )


def generate_truth(scenario: ScenarioConfig) -> list[list[tuple[int, np.ndarray]]]:
    """Noiseless truth per step: truth[k - 1] lists (target id, state) alive at step k."""
    F = scenario.motion.transition
    states = {i: t.initial_state.copy() for i, t in enumerate(scenario.targets)}
    out = []
    for k in range(1, scenario.duration + 1):
        alive = []
        for i, t in enumerate(scenario.targets):
            if t.birth_step <= k < t.death_step:
                alive.append((i, states[i].copy()))
        out.append(alive)
        for i, t in enumerate(scenario.targets):
            if t.birth_step <= k < t.death_step:
                states[i] = F @ states[i]
    return out


def truth_positions(truth_at_step) -> np.ndarray:
    if not truth_at_step:
        return np.zeros((0, 2))
    return np.array([[x[0], x[2]] for _, x in truth_at_step])


def measurement_stream(seed: int, run: int, sensor: int, step: int) -> np.random.Generator:
    """Independent generator for one (run, sensor, step) cell."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(run, sensor, step))
    )


def generate_measurements(truth_at_step, sensor: SensorModel, rng: np.random.Generator):
    """Detections plus clutter for one sensor at one step, shuffled.

    Each alive target inside the field of view is detected with the
    sensor's detection probability and measured with additive Gaussian
    noise; the clutter count is Poisson and clutter points are uniform over
    the measurement region.
    """
    noise_chol = np.linalg.cholesky(sensor.noise_cov)
    out = []
    for _, x in truth_at_step:
        if not in_fov((x[0], x[2]), sensor):
            continue
        if rng.random() >= sensor.detection:
            continue
        if sensor.kind == "linear":
            z = np.array([x[0], x[2]])
        else:
            z = range_bearing(x, sensor)
        out.append(z + noise_chol @ rng.standard_normal(2))
    n_clutter = int(rng.poisson(sensor.clutter_rate))
    for _ in range(n_clutter):
        if sensor.kind == "linear":
            xmin, xmax, ymin, ymax = sensor.fov
            out.append(np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)]))
        else:
            out.append(
                np.array([rng.uniform(0.0, sensor.fov_radius), rng.uniform(-np.pi, np.pi)])
            )
    order = rng.permutation(len(out))
    return [out[i] for i in order]
