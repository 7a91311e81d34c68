"""Experiment configuration: a flat INI file with sections, validated
against a fixed schema with the simulator defaults applied.

Defaults are the standard operating point: budget 1000 timesteps, sensor
range 20 m with 2500 rays, raycast threshold 0.8, ensemble size 3.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .frontier import SCORER_KINDS
from .grid import GridPose
from .infogain import RaycastConfig
from .world import SensorSpec

PREDICTOR_KINDS = ("passthrough", "noisy_oracle", "patch", "external")

# section -> {key: (type, default)}; type "str"/"int"/"float"/"bool".
_SCHEMA = {
    "maps": {
        "source": ("str", None),  # "files" or "generate"; inferred when absent
        "glob": ("str", None),
        "count": ("int", 10),
        "width": ("int", 200),
        "height": ("int", 200),
        "map_seed": ("int", 0),
        "rooms_min": ("int", 6),
        "rooms_max": ("int", 12),
        "corridor_width": ("int", 8),
        "resolution": ("float", 0.1),
    },
    "starts": {
        "policy": ("str", "corners"),
        "poses": ("str", None),
    },
    "episode": {
        "budget": ("int", 1000),
        "scorer": ("str", "mapex"),
        "min_cluster_size": ("int", 10),
        "max_waypoint_age": ("int", 50),
    },
    "sensor": {
        "range": ("float", 20.0),
        "rays": ("int", 2500),
    },
    "raycast": {
        "epsilon": ("float", 0.8),
        "rays": ("int", 60),
        "range": ("float", 20.0),
    },
    "predictor": {
        "kind": ("str", "passthrough"),
        "ensemble": ("int", 3),
        "flip_rate": ("float", 0.05),
        "command": ("str", None),
        "corpus": ("str", None),
        "block": ("int", 16),
        "ring": ("int", 2),
    },
    "metrics": {
        "checkpoint_every": ("int", 100),
        "tu_goals": ("int", 100),
    },
    "output": {
        "dir": ("str", "results"),
        "seeds": ("str", "0"),
        "snapshots": ("bool", True),
    },
}


@dataclass
class MapSource:
    kind: str  # "files" | "generate"
    glob: str | None = None
    count: int = 10
    width: int = 200
    height: int = 200
    map_seed: int = 0
    rooms_min: int = 6
    rooms_max: int = 12
    corridor_width: int = 8
    resolution: float = 0.1


@dataclass
class PredictorSpec:
    kind: str = "passthrough"
    ensemble: int = 3
    flip_rate: float = 0.05
    command: str | None = None
    corpus: str | None = None
    block: int = 16
    ring: int = 2


@dataclass
class ExperimentConfig:
    maps: MapSource
    starts: str | list[GridPose]  # "corners" or explicit poses
    scorers: list[str]
    budget: int = 1000
    min_cluster_size: int = 10
    max_waypoint_age: int = 50
    sensor: SensorSpec = field(default_factory=SensorSpec)
    raycast: RaycastConfig = field(default_factory=RaycastConfig)
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    checkpoint_every: int = 100
    tu_goals: int = 100
    output_dir: str = "results"
    seeds: list[int] = field(default_factory=lambda: [0])
    snapshots: bool = True


def _convert(section: str, key: str, kind: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind}") from None


def _parse_poses(text: str) -> list[GridPose]:
    poses = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            x, y = (int(v) for v in part.split(","))
        except ValueError:
            raise ConfigError(f"[starts] poses: bad pose {part!r}, expected x,y") from None
        poses.append(GridPose(x, y))
    if not poses:
        raise ConfigError("[starts] poses: no poses given")
    return poses


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key [{section}] {key}")
            values[section][key] = _convert(section, key, _SCHEMA[section][key][0], raw)

    def get(section, key):
        if section in values and key in values[section]:
            return values[section][key]
        return _SCHEMA[section][key][1]

    source = get("maps", "source")
    glob = get("maps", "glob")
    if source is None:
        source = "files" if glob else "generate"
    if source not in ("files", "generate"):
        raise ConfigError(f"[maps] source: must be 'files' or 'generate', got {source!r}")
    if source == "files" and not glob:
        raise ConfigError("[maps] glob: required when maps come from files")
    if get("maps", "count") < 1:
        raise ConfigError("[maps] count: must be >= 1")
    maps = MapSource(
        kind=source,
        glob=glob,
        count=get("maps", "count"),
        width=get("maps", "width"),
        height=get("maps", "height"),
        map_seed=get("maps", "map_seed"),
        rooms_min=get("maps", "rooms_min"),
        rooms_max=get("maps", "rooms_max"),
        corridor_width=get("maps", "corridor_width"),
        resolution=get("maps", "resolution"),
    )

    policy = get("starts", "policy")
    if policy == "corners":
        starts: str | list[GridPose] = "corners"
    elif policy == "explicit":
        raw = get("starts", "poses")
        if raw is None:
            raise ConfigError("[starts] poses: required for explicit starts")
        starts = _parse_poses(raw)
    else:
        raise ConfigError(f"[starts] policy: must be 'corners' or 'explicit', got {policy!r}")

    scorers = [s.strip() for s in get("episode", "scorer").split(",") if s.strip()]
    if not scorers:
        raise ConfigError("[episode] scorer: at least one scorer required")
    for s in scorers:
        if s not in SCORER_KINDS:
            raise ConfigError(f"[episode] scorer: unknown kind {s!r}")

    budget = get("episode", "budget")
    if budget < 0:
        raise ConfigError("[episode] budget: must be >= 0")

    try:
        sensor = SensorSpec(range_lambda=get("sensor", "range"), n_rays=get("sensor", "rays"))
    except ValueError as exc:
        raise ConfigError(f"[sensor] {exc}") from exc
    try:
        raycast = RaycastConfig(
            epsilon=get("raycast", "epsilon"),
            n_rays=get("raycast", "rays"),
            range_lambda=get("raycast", "range"),
        )
    except ValueError as exc:
        raise ConfigError(f"[raycast] {exc}") from exc

    kind = get("predictor", "kind")
    if kind not in PREDICTOR_KINDS:
        raise ConfigError(f"[predictor] kind: unknown kind {kind!r}")
    if get("predictor", "ensemble") < 1:
        raise ConfigError("[predictor] ensemble: must be >= 1")
    if kind == "external" and not get("predictor", "command"):
        raise ConfigError("[predictor] command: required for the external predictor")
    if kind == "patch" and not get("predictor", "corpus"):
        raise ConfigError("[predictor] corpus: required for the patch predictor")
    if not 0.0 <= get("predictor", "flip_rate") <= 1.0:
        raise ConfigError("[predictor] flip_rate: must be in [0, 1]")
    predictor = PredictorSpec(
        kind=kind,
        ensemble=get("predictor", "ensemble"),
        flip_rate=get("predictor", "flip_rate"),
        command=get("predictor", "command"),
        corpus=get("predictor", "corpus"),
        block=get("predictor", "block"),
        ring=get("predictor", "ring"),
    )

    seeds_raw = get("output", "seeds")
    try:
        seeds = [int(s) for s in str(seeds_raw).split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigError(f"[output] seeds: cannot parse {seeds_raw!r}") from None
    if not seeds:
        raise ConfigError("[output] seeds: at least one seed required")

    return ExperimentConfig(
        maps=maps,
        starts=starts,
        scorers=scorers,
        budget=budget,
        min_cluster_size=get("episode", "min_cluster_size"),
        max_waypoint_age=get("episode", "max_waypoint_age"),
        sensor=sensor,
        raycast=raycast,
        predictor=predictor,
        checkpoint_every=get("metrics", "checkpoint_every"),
        tu_goals=get("metrics", "tu_goals"),
        output_dir=get("output", "dir"),
        seeds=seeds,
        snapshots=get("output", "snapshots"),
    )
