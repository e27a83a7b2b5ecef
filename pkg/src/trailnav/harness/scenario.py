"""Scenario files (schema ``trail-scenario/1``) and terrain construction.

A scenario is a JSON object with these top-level keys::

    schema      "trail-scenario/1"
    name        free text
    region      [x_min, x_max, y_min, y_max]           metres
    elevation   list of primitives (summed)            metres
    bumpiness   {"terms": [primitives], "scale": s, "offset": o}
                squashed as sigmoid(scale * sum(terms) + offset)
    start       {"x", "y", "yaw"}
    goal        {"x", "y"}
    limits      VehicleLimits fields
    trail       planner settings (see TrailSettings)
    mppi        MppiConfig fields, with "weights" as MppiWeights fields
    sim         {"dt", "time_cap", "goal_radius", "trials", "seed"}

Primitives are objects with a ``type``:

* ``constant``: ``value``
* ``plane``: ``gx``, ``gy``, ``offset``
* ``gaussian_bump``: ``center`` [x, y], ``amplitude``, ``width``
* ``box_step``: ``x0``, ``x1``, ``y0``, ``y1``, ``height``, ``edge``
* ``random_bumps``: ``count``, ``amplitude``, ``width``, ``area`` [x0, x1, y0, y1],
  ``seed``; Gaussian bumps with uniformly drawn centres.

Rasters (cost grids and gridded fields) are stored as JSON objects
``{origin_x, origin_y, resolution, rows, cols, values}`` where ``values`` is
row-major, row 0 lies at ``origin_y`` and the origin is the position of the
first sample.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from ..costmap import GeomCostParams
from ..errors import ConfigInvalid
from ..field import (
    BoxStepField,
    Bounds,
    ConstantField,
    GaussianBumpField,
    PlaneField,
    SquashedField,
    SumField,
    TerrainField,
)
from ..mppi import MppiConfig, MppiWeights
from ..timescale import VehicleLimits
from ..track import MpcWeights
from ..trajopt import FootprintSpec, ObjectiveWeights, OptimizerConfig, SpeedParams

SCHEMA = "trail-scenario/1"
BUILTIN = ("grassland", "forest", "flat", "blocked", "speed_strip")


@dataclass(frozen=True)
class TrailSettings:
    geom: GeomCostParams = field(default_factory=GeomCostParams)
    cost_floor: float = 0.05
    lethal_threshold: float = 0.95
    inflation_radius: float = 0.0
    n_init: int = 30
    n_dense: int = 64
    speed: SpeedParams = field(default_factory=SpeedParams)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    footprint: FootprintSpec = field(default_factory=FootprintSpec)
    learning_rate: float = 0.05
    iterations: int = 50
    grad_clip_norm: float = 1.0
    mpc: MpcWeights = field(default_factory=MpcWeights)
    replan_period: float = 0.5
    replan_min_distance: float = 1.0


@dataclass(frozen=True)
class SimSettings:
    dt: float = 0.05
    time_cap: float = 60.0
    goal_radius: float = 0.5
    trials: int = 3
    seed: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    region: Bounds
    elevation: tuple
    bumpiness: dict
    start: tuple[float, float, float]
    goal: tuple[float, float]
    limits: VehicleLimits = field(default_factory=VehicleLimits)
    trail: TrailSettings = field(default_factory=TrailSettings)
    mppi: MppiConfig = field(default_factory=MppiConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def optimizer_config(self) -> OptimizerConfig:
        t = self.trail
        return OptimizerConfig(learning_rate=t.learning_rate, iterations=t.iterations,
                               grad_clip_norm=t.grad_clip_norm, bounds=self.region, n_dense=t.n_dense)

    def with_overrides(self, **changes: Any) -> ScenarioConfig:
        return replace(self, **changes)


def _build(cls, data: dict | None, where: str, nested: dict | None = None):
    data = dict(data or {})
    nested = nested or {}
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigInvalid(f"{where}: unknown keys {sorted(unknown)}")
    for key, sub in nested.items():
        if key in data:
            data[key] = _build(sub, data[key], f"{where}.{key}")
    for key, val in data.items():
        if isinstance(val, list):
            data[key] = tuple(val)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{where}: {exc}") from exc


def _primitive(spec: dict) -> TerrainField:
    kind = spec.get("type")
    p = {k: v for k, v in spec.items() if k != "type"}
    try:
        if kind == "constant":
            return ConstantField(p["value"])
        if kind == "plane":
            return PlaneField(p.get("gx", 0.0), p.get("gy", 0.0), p.get("offset", 0.0))
        if kind == "gaussian_bump":
            return GaussianBumpField([p["center"]], [p["amplitude"]], [p["width"]])
        if kind == "box_step":
            return BoxStepField(p["x0"], p["x1"], p["y0"], p["y1"], p["height"], p.get("edge", 0.1))
        if kind == "random_bumps":
            rng = np.random.default_rng(int(p.get("seed", 0)))
            x0, x1, y0, y1 = p["area"]
            n = int(p["count"])
            centers = np.stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)], axis=1)
            return GaussianBumpField(centers, np.full(n, float(p["amplitude"])), np.full(n, float(p["width"])))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigInvalid(f"bad {kind!r} primitive: {exc}") from exc
    raise ConfigInvalid(f"unknown primitive type {kind!r}")


def build_field(primitives, region: Bounds) -> TerrainField:
    parts = [_primitive(p) for p in primitives]
    if not parts:
        return ConstantField(0.0, bounds=region)
    return SumField(parts, bounds=region)


def build_elevation(sc: ScenarioConfig) -> TerrainField:
    return build_field(sc.elevation, sc.region)


def build_bumpiness(sc: ScenarioConfig) -> TerrainField:
    b = sc.bumpiness
    return SquashedField(build_field(b.get("terms", []), sc.region), b.get("scale", 1.0), b.get("offset", 0.0))


def parse_scenario(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario must be a JSON object")
    if data.get("schema") != SCHEMA:
        raise ConfigInvalid(f"unsupported schema {data.get('schema')!r}; expected {SCHEMA!r}")
    allowed = {"schema", "name", "region", "elevation", "bumpiness", "start", "goal", "limits", "trail", "mppi", "sim"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown top-level keys {sorted(unknown)}")
    try:
        region = Bounds.of(data["region"])
        start = data["start"]
        start = (float(start["x"]), float(start["y"]), float(start.get("yaw", 0.0)))
        goal = (float(data["goal"]["x"]), float(data["goal"]["y"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"missing or malformed region/start/goal: {exc}") from exc
    if not region.contains(np.array([start[:2], goal])).all():
        raise ConfigInvalid("start and goal must lie inside the region")
    bump = data.get("bumpiness", {})
    if not isinstance(bump, dict) or not set(bump) <= {"terms", "scale", "offset"}:
        raise ConfigInvalid("bumpiness must be {terms, scale, offset}")
    mppi_raw = dict(data.get("mppi", {}))
    sc = ScenarioConfig(
        name=str(data.get("name", "scenario")),
        region=region,
        elevation=tuple(data.get("elevation", [])),
        bumpiness=copy.deepcopy(bump),
        start=start,
        goal=goal,
        limits=_build(VehicleLimits, data.get("limits"), "limits"),
        trail=_build(TrailSettings, data.get("trail"), "trail", {
            "geom": GeomCostParams, "speed": SpeedParams, "weights": ObjectiveWeights,
            "footprint": FootprintSpec, "mpc": MpcWeights}),
        mppi=_build(MppiConfig, mppi_raw, "mppi", {"weights": MppiWeights}),
        sim=_build(SimSettings, data.get("sim"), "sim"),
        raw=copy.deepcopy(data),
    )
    if not sc.sim.time_cap > 0 or not sc.sim.dt > 0 or sc.sim.trials < 1:
        raise ConfigInvalid("sim needs time_cap > 0, dt > 0 and trials >= 1")
    # Build once so malformed primitives fail at load time.
    build_elevation(sc)
    build_bumpiness(sc)
    return sc


def load_scenario(source: str | Path | dict) -> ScenarioConfig:
    """Load a scenario from a dict, a JSON file, or a builtin name."""
    if isinstance(source, dict):
        return parse_scenario(source)
    text = str(source)
    if text in BUILTIN:
        data = json.loads(resources.files("trailnav.scenarios").joinpath(f"{text}.json").read_text())
        return parse_scenario(data)
    path = Path(text)
    if not path.exists():
        raise ConfigInvalid(f"scenario file {path} not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    return parse_scenario(data)


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))
