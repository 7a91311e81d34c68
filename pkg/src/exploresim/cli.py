"""Experiment harness and command line.

Subcommands:

    explore run <config> [--workers N]     batch episodes + results CSV
    explore generate-maps ...              emit procedural floor plans
    explore score-map <observed> <gt>      metrics for a pair of maps
    explore replay <record.jsonl> ...      re-emit snapshots from a record

Each episode writes a line-delimited JSON record (header line, one line per
timestep, replan lines, end line) plus checkpoint PGM snapshots of the
observed/mean/variance maps. Records contain no wall-clock data, so a rerun
with the same config and seed is byte-identical. The batch is resumable:
rows whose outputs already exist are not re-executed.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import glob as globmod
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, MapSource, PredictorSpec, parse_config
from .errors import ConfigError
from .grid import GridPose, OccupancyGrid, load_pgm, save_pgm
from .metrics import (
    auc,
    building_footprint,
    coverage_of,
    iou_occupied,
    topological_understanding,
)
from .planner import EpisodeConfig, EpisodeRecord, run_episode
from .predict import (
    ExternalPredictor,
    NoisyOraclePredictor,
    PassThroughPredictor,
    PatchInpaintingPredictor,
    PredictorEnsemble,
    ensemble_predict,
)
from .world import SensorSpec, generate_floorplan, integrate_scan, simulate_scan

CSV_COLUMNS = [
    "map", "start_x", "start_y", "scorer", "seed", "status", "end_reason", "steps",
    "final_coverage", "coverage_auc", "final_iou", "iou_auc", "tu_final",
    "tu_checkpoints", "wall_time_s",
]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def corner_starts(gt: OccupancyGrid) -> list[GridPose]:
    """Nearest free in-footprint cell to each grid corner (ties: smaller y, x)."""
    free = (gt.cells < 0.25) & building_footprint(gt)
    if not free.any():
        free = gt.cells < 0.25
    if not free.any():
        raise ValueError("map has no free cells")
    ys, xs = np.nonzero(free)
    out = []
    for cx, cy in ((0, 0), (gt.width - 1, 0), (0, gt.height - 1), (gt.width - 1, gt.height - 1)):
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        best = np.lexsort((xs, ys, d2))[0]
        out.append(GridPose(int(xs[best]), int(ys[best])))
    return out


def _binarized(grid: OccupancyGrid) -> OccupancyGrid:
    return OccupancyGrid((grid.cells > 0.5).astype(np.float64), grid.resolution)


def materialize_maps(maps: MapSource) -> list[tuple[str, OccupancyGrid]]:
    """(label, binary ground truth) pairs from files or the generator."""
    if maps.kind == "files":
        paths = sorted(globmod.glob(maps.glob))
        if not paths:
            raise ConfigError(f"[maps] glob: {maps.glob!r} matched no files")
        return [(Path(p).stem, _binarized(load_pgm(p, resolution=maps.resolution)))
                for p in paths]
    out = []
    for i in range(maps.count):
        seed = maps.map_seed + i
        gt = generate_floorplan(
            seed, width=maps.width, height=maps.height,
            room_count_range=(maps.rooms_min, maps.rooms_max),
            corridor_width=maps.corridor_width, resolution=maps.resolution,
        )
        out.append((f"gen{seed:04d}", gt))
    return out


def member_seed(row_seed: int, map_index: int, member: int) -> int:
    """Stable per-member RNG seed; independent of the scorer so scorer
    comparisons on the same row are paired."""
    return int(np.random.SeedSequence((row_seed, map_index, member)).generate_state(1)[0])


def build_ensemble(spec: PredictorSpec, gt: OccupancyGrid, seeds: list[int]) -> PredictorEnsemble:
    if spec.kind == "passthrough":
        return PredictorEnsemble([PassThroughPredictor() for _ in range(spec.ensemble)])
    if spec.kind == "noisy_oracle":
        return PredictorEnsemble(
            [NoisyOraclePredictor(gt, spec.flip_rate, s) for s in seeds]
        )
    if spec.kind == "patch":
        paths = sorted(globmod.glob(spec.corpus))
        if not paths:
            raise ConfigError(f"[predictor] corpus: {spec.corpus!r} matched no files")
        corpus = [load_pgm(p, resolution=gt.resolution) for p in paths]
        members = []
        for i in range(spec.ensemble):
            subset = corpus[i::spec.ensemble] or corpus
            members.append(PatchInpaintingPredictor(subset, spec.block, spec.ring))
        return PredictorEnsemble(members)
    if spec.kind == "external":
        commands = [c.strip() for c in spec.command.split(";") if c.strip()]
        members = [ExternalPredictor(commands[i % len(commands)])
                   for i in range(spec.ensemble)]
        return PredictorEnsemble(members)
    raise ConfigError(f"unknown predictor kind {spec.kind!r}")


@dataclass
class RowSpec:
    """One (map, start, scorer, seed) cell of the experiment grid."""

    map_label: str
    map_index: int
    start: GridPose
    start_index: int
    scorer: str
    seed: int

    @property
    def name(self) -> str:
        return (f"{self.map_label}__s{self.start.x}-{self.start.y}"
                f"__{self.scorer}__seed{self.seed}")


def record_lines(record: EpisodeRecord, header: dict) -> list[str]:
    """Record serialized as JSON lines; replan lines precede their step."""
    lines = [_dumps({"type": "header", **header})]
    replans = {r.t: r for r in record.replans}
    for row in record.rows:
        if row.t in replans:
            r = replans[row.t]
            lines.append(_dumps({
                "type": "replan", "t": r.t, "n_clusters": r.n_clusters,
                "chosen": None if r.chosen_x is None else [r.chosen_x, r.chosen_y],
                "attempts": r.attempts, "scores": r.scores,
            }))
        lines.append(_dumps({
            "type": "step", "t": row.t, "x": row.x, "y": row.y,
            "coverage": row.coverage, "replanned": row.replanned,
            "waypoint": None if row.waypoint_x is None else [row.waypoint_x, row.waypoint_y],
        }))
    lines.append(_dumps({
        "type": "end", "reason": record.end_reason, "t": record.final_t,
        "pose": [record.final_pose.x, record.final_pose.y],
        "coverage": record.final_coverage,
    }))
    return lines


def _map_descriptor(cfg_maps: MapSource, label: str, map_index: int) -> dict:
    if cfg_maps.kind == "files":
        paths = sorted(globmod.glob(cfg_maps.glob))
        return {"kind": "file", "path": paths[map_index], "resolution": cfg_maps.resolution}
    return {
        "kind": "generated", "seed": cfg_maps.map_seed + map_index,
        "width": cfg_maps.width, "height": cfg_maps.height,
        "rooms_min": cfg_maps.rooms_min, "rooms_max": cfg_maps.rooms_max,
        "corridor_width": cfg_maps.corridor_width, "resolution": cfg_maps.resolution,
    }


def _gt_from_descriptor(desc: dict) -> OccupancyGrid:
    if desc["kind"] == "file":
        return _binarized(load_pgm(desc["path"], resolution=desc["resolution"]))
    return generate_floorplan(
        desc["seed"], width=desc["width"], height=desc["height"],
        room_count_range=(desc["rooms_min"], desc["rooms_max"]),
        corridor_width=desc["corridor_width"], resolution=desc["resolution"],
    )


def _write_snapshots(row_dir: Path, record: EpisodeRecord) -> None:
    for cp in record.checkpoints:
        save_pgm(cp.observed, row_dir / f"obs_t{cp.t:05d}.pgm")
        if cp.mean is not None:
            save_pgm(cp.mean, row_dir / f"mean_t{cp.t:05d}.pgm")
        if cp.variance is not None:
            save_pgm(cp.variance, row_dir / f"var_t{cp.t:05d}.pgm")


def run_row(cfg: ExperimentConfig, spec: RowSpec, gt: OccupancyGrid, out_dir: Path) -> dict:
    """Execute one experiment row and write its outputs. Returns CSV values."""
    row_dir = out_dir / spec.name
    metrics_path = row_dir / "metrics.json"
    record_path = row_dir / "record.jsonl"
    if metrics_path.exists() and record_path.exists():
        with open(metrics_path) as fh:
            return json.load(fh)

    row_dir.mkdir(parents=True, exist_ok=True)
    seeds = [member_seed(spec.seed, spec.map_index, i) for i in range(cfg.predictor.ensemble)]
    ensemble = build_ensemble(cfg.predictor, gt, seeds)
    ep_cfg = EpisodeConfig(
        budget_t=cfg.budget, scorer=spec.scorer, sensor=cfg.sensor, raycast=cfg.raycast,
        min_cluster_size=cfg.min_cluster_size, max_waypoint_age=cfg.max_waypoint_age,
        checkpoint_every=cfg.checkpoint_every, collect_checkpoints=True,
    )

    t0 = time.monotonic()
    record = run_episode(gt, spec.start, ep_cfg, ensemble)
    wall = time.monotonic() - t0

    header = {
        "map": _map_descriptor(cfg.maps, spec.map_label, spec.map_index),
        "map_label": spec.map_label,
        "start": [spec.start.x, spec.start.y],
        "scorer": spec.scorer,
        "seed": spec.seed,
        "budget": cfg.budget,
        "sensor": {"range": cfg.sensor.range_lambda, "rays": cfg.sensor.n_rays},
        "raycast": {"epsilon": cfg.raycast.epsilon, "rays": cfg.raycast.n_rays,
                    "range": cfg.raycast.range_lambda},
        "predictor": {"kind": cfg.predictor.kind, "ensemble": cfg.predictor.ensemble,
                      "flip_rate": cfg.predictor.flip_rate, "command": cfg.predictor.command,
                      "corpus": cfg.predictor.corpus, "block": cfg.predictor.block,
                      "ring": cfg.predictor.ring, "member_seeds": seeds},
        "min_cluster_size": cfg.min_cluster_size,
        "max_waypoint_age": cfg.max_waypoint_age,
        "checkpoint_every": cfg.checkpoint_every,
    }
    with open(record_path, "w") as fh:
        fh.write("\n".join(record_lines(record, header)) + "\n")
    if cfg.snapshots:
        _write_snapshots(row_dir, record)

    footprint = building_footprint(gt)
    cov = [r.coverage for r in record.rows]
    times = [r.t for r in record.rows]
    cov_auc = auc(cov, times) if cov else 0.0

    iou_series, iou_times, tu_points = [], [], []
    for cp in record.checkpoints:
        pred = cp.mean if cp.mean is not None else cp.observed
        iou_series.append(iou_occupied(pred, gt, footprint))
        iou_times.append(cp.t)
        if cfg.tu_goals > 0:
            tu_points.append((cp.t, topological_understanding(
                pred, gt, spec.start, n_goals=cfg.tu_goals, seed=spec.seed)))
    final_pred = record.final_prediction_mean or record.final_observed
    final_iou = iou_occupied(final_pred, gt, footprint)
    if not iou_times or iou_times[-1] != record.final_t:
        iou_series.append(final_iou)
        iou_times.append(record.final_t)
    tu_final = tu_points[-1][1] if tu_points else (
        topological_understanding(final_pred, gt, spec.start,
                                  n_goals=cfg.tu_goals, seed=spec.seed)
        if cfg.tu_goals > 0 else ""
    )

    result = {
        "map": spec.map_label, "start_x": spec.start.x, "start_y": spec.start.y,
        "scorer": spec.scorer, "seed": spec.seed, "status": "ok",
        "end_reason": record.end_reason, "steps": record.final_t,
        "final_coverage": record.final_coverage, "coverage_auc": cov_auc,
        "final_iou": final_iou,
        "iou_auc": auc(iou_series, iou_times) if len(iou_series) > 1 else final_iou,
        "tu_final": tu_final,
        "tu_checkpoints": ";".join(f"{t}:{v:.4f}" for t, v in tu_points),
        "wall_time_s": round(wall, 3),
    }
    with open(metrics_path, "w") as fh:
        json.dump(result, fh, sort_keys=True, indent=1)
    return result


def _run_row_task(args):
    cfg, spec, desc, out_dir = args
    gt = _gt_from_descriptor(desc)
    try:
        return run_row(cfg, spec, gt, Path(out_dir))
    except Exception as exc:  # a failed row must not sink the batch
        return {
            "map": spec.map_label, "start_x": spec.start.x, "start_y": spec.start.y,
            "scorer": spec.scorer, "seed": spec.seed, "status": f"error: {exc}",
            "end_reason": "", "steps": "", "final_coverage": "", "coverage_auc": "",
            "final_iou": "", "iou_auc": "", "tu_final": "", "tu_checkpoints": "",
            "wall_time_s": "",
        }


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Run every (map, start, scorer, seed) combination; returns CSV rows."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    maps = materialize_maps(cfg.maps)

    tasks = []
    for mi, (label, gt) in enumerate(maps):
        starts = corner_starts(gt) if cfg.starts == "corners" else cfg.starts
        desc = _map_descriptor(cfg.maps, label, mi)
        for si, start in enumerate(starts):
            if not gt.in_bounds(start.x, start.y) or gt.at(start) != 0.0:
                raise ConfigError(f"start {start} is not a free cell of map {label}")
            for scorer in cfg.scorers:
                for seed in cfg.seeds:
                    spec = RowSpec(label, mi, start, si, scorer, seed)
                    tasks.append((cfg, spec, desc, str(out_dir)))

    if workers is None:
        workers = int(os.environ.get("EXPLORE_WORKERS", "1"))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_row_task, tasks))
    else:
        rows = [_run_row_task(t) for t in tasks]

    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def replay(record_path, out_dir) -> list[Path]:
    """Re-emit checkpoint snapshots by re-simulating the recorded episode."""
    record_path = Path(record_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    steps, replan_ts = [], set()
    header = None
    with open(record_path) as fh:
        for line in fh:
            obj = json.loads(line)
            if obj["type"] == "header":
                header = obj
            elif obj["type"] == "step":
                steps.append(obj)
            elif obj["type"] == "replan":
                replan_ts.add(obj["t"])
    if header is None:
        raise ValueError(f"{record_path} has no header line")

    gt = _gt_from_descriptor(header["map"])
    pspec = PredictorSpec(**{k: header["predictor"][k] for k in
                             ("kind", "ensemble", "flip_rate", "command", "corpus",
                              "block", "ring")})
    ensemble = build_ensemble(pspec, gt, header["predictor"]["member_seeds"])
    sensor = SensorSpec(range_lambda=header["sensor"]["range"], n_rays=header["sensor"]["rays"])
    every = header["checkpoint_every"]

    from .grid import new_grid

    observed = new_grid(gt.width, gt.height, gt.resolution)
    latest = None
    written = []
    for row in steps:
        scan = simulate_scan(gt, GridPose(row["x"], row["y"]), sensor)
        integrate_scan(observed, scan)
        if row["t"] in replan_ts:
            latest = ensemble_predict(ensemble, observed)
        if every > 0 and (row["t"] + 1) % every == 0:
            t = row["t"] + 1
            save_pgm(observed, out_dir / f"obs_t{t:05d}.pgm")
            written.append(out_dir / f"obs_t{t:05d}.pgm")
            if latest is not None:
                save_pgm(latest.mean, out_dir / f"mean_t{t:05d}.pgm")
                save_pgm(latest.variance, out_dir / f"var_t{t:05d}.pgm")
                written += [out_dir / f"mean_t{t:05d}.pgm", out_dir / f"var_t{t:05d}.pgm"]
    return written


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    rows = run_experiment(cfg, workers=args.workers)
    bad = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} rows, {len(rows) - len(bad)} ok, {len(bad)} failed; "
          f"results in {cfg.output_dir}/results.csv")
    for r in bad:
        print(f"  FAILED {r['map']} start=({r['start_x']},{r['start_y']}) "
              f"{r['scorer']} seed={r['seed']}: {r['status']}")
    return 1 if bad else 0


def _cmd_generate_maps(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        gt = generate_floorplan(
            seed, width=args.width, height=args.height,
            room_count_range=(args.rooms_min, args.rooms_max),
            corridor_width=args.corridor_width, resolution=args.resolution,
        )
        path = out / f"gen{seed:04d}.pgm"
        save_pgm(gt, path)
        print(path)
    return 0


def _cmd_score_map(args) -> int:
    observed = load_pgm(args.observed)
    gt = _binarized(load_pgm(args.gt))
    footprint = building_footprint(gt)
    print(f"coverage: {coverage_of(observed, footprint):.2f}")
    print(f"iou_occupied: {iou_occupied(observed, gt, footprint):.4f}")
    if args.tu_start:
        x, y = (int(v) for v in args.tu_start.split(","))
        tu = topological_understanding(observed, gt, GridPose(x, y),
                                       n_goals=args.tu_goals, seed=args.tu_seed)
        print(f"topological_understanding: {tu:.4f}")
    return 0


def _cmd_replay(args) -> int:
    written = replay(args.record, args.out)
    for p in written:
        print(p)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="explore",
                                     description="2D exploration experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel rows (default: EXPLORE_WORKERS or 1)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("generate-maps", help="write procedural floor plans")
    p.add_argument("--out", default="maps")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--width", type=int, default=200)
    p.add_argument("--height", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rooms-min", type=int, default=6)
    p.add_argument("--rooms-max", type=int, default=12)
    p.add_argument("--corridor-width", type=int, default=8)
    p.add_argument("--resolution", type=float, default=0.1)
    p.set_defaults(func=_cmd_generate_maps)

    p = sub.add_parser("score-map", help="metrics for an observed/ground-truth pair")
    p.add_argument("observed")
    p.add_argument("gt")
    p.add_argument("--tu-start", default=None, help="x,y for plan-success metric")
    p.add_argument("--tu-goals", type=int, default=100)
    p.add_argument("--tu-seed", type=int, default=0)
    p.set_defaults(func=_cmd_score_map)

    p = sub.add_parser("replay", help="re-emit snapshots from a record log")
    p.add_argument("record")
    p.add_argument("--out", default="replay")
    p.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
