"""A* local planning on the diagonally-connected grid and the top-level
exploration episode loop.

Planning treats unknown cells as traversable: frontier centroids border
unknown space by definition, so a plan usually has to cross it. Safety
comes from the world model instead — each step is validated against the
ground truth, a blocked move is a no-op that still costs a timestep, and
the waypoint is invalidated as soon as a newly observed wall crosses the
remaining path.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .frontier import ScoreContext, extract_frontiers, rank_frontiers, score_frontier
from .grid import OCCUPIED, UNKNOWN, GridPose, OccupancyGrid, new_grid
from .infogain import RaycastConfig
from .predict import PredictorEnsemble, ensemble_predict
from .world import RobotState, SensorSpec, apply_action, integrate_scan, simulate_scan

SQRT2 = math.sqrt(2.0)

_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)


def octile(ax: int, ay: int, bx: int, by: int) -> float:
    dx = abs(ax - bx)
    dy = abs(ay - by)
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar(blocked: np.ndarray, start: GridPose, goal: GridPose) -> list[GridPose] | None:
    """Minimal-cost 8-connected path (unit straight, sqrt(2) diagonal).

    `blocked` is a boolean (height, width) array. A diagonal step with both
    of its orthogonal neighbors blocked is forbidden (no squeezing through
    fully closed corners). Returns None when the goal is unreachable.

    Ties on f break toward larger g, which keeps paths optimal but avoids
    flooding the equal-f ellipse in open space.
    """
    h, w = blocked.shape
    if not (0 <= start.x < w and 0 <= start.y < h):
        raise ValueError(f"start {start} is outside the grid")
    if blocked[start.y, start.x]:
        raise ValueError(f"start {start} is on a blocked cell")
    if not (0 <= goal.x < w and 0 <= goal.y < h):
        raise ValueError(f"goal {goal} is outside the grid")
    if blocked[goal.y, goal.x]:
        return None

    blk = blocked.ravel().tolist()
    gx, gy = goal.x, goal.y
    r2 = SQRT2 - 1.0
    inf = math.inf
    gscore = [inf] * (h * w)
    parent = [-1] * (h * w)
    start_i = start.y * w + start.x
    goal_i = gy * w + gx
    gscore[start_i] = 0.0
    heap = [(octile(start.x, start.y, gx, gy), 0.0, 0, start.x, start.y)]
    seq = 0
    pop = heapq.heappop
    push = heapq.heappush
    while heap:
        _, neg_g, _, x, y = pop(heap)
        i = y * w + x
        gxy = gscore[i]
        if -neg_g > gxy + 1e-12:
            continue  # stale entry, a cheaper route was found since the push
        if i == goal_i:
            path = [GridPose(x, y)]
            while i != start_i:
                i = parent[i]
                path.append(GridPose(i % w, i // w))
            path.reverse()
            return path
        for dx, dy, step in _NEIGHBORS:
            nx = x + dx
            ny = y + dy
            if nx < 0 or nx >= w or ny < 0 or ny >= h:
                continue
            ni = ny * w + nx
            if blk[ni]:
                continue
            if dx and dy and blk[y * w + nx] and blk[ny * w + x]:
                continue  # corner fully closed
            ng = gxy + step
            if ng < gscore[ni] - 1e-12:
                gscore[ni] = ng
                parent[ni] = i
                ddx = nx - gx if nx >= gx else gx - nx
                ddy = ny - gy if ny >= gy else gy - ny
                hcost = ddx + r2 * ddy if ddx >= ddy else ddy + r2 * ddx
                seq += 1
                push(heap, (ng + hcost, -ng, seq, nx, ny))
    return None


def path_cost(path: list[GridPose]) -> float:
    """Octile cost of an 8-connected path."""
    cost = 0.0
    for a, b in zip(path, path[1:]):
        cost += SQRT2 if (a.x != b.x and a.y != b.y) else 1.0
    return cost


def waypoint_valid(
    state: RobotState,
    waypoint: GridPose | None,
    path: list[GridPose] | None,
    observed: OccupancyGrid,
    *,
    path_index: int = 0,
    age: int = 0,
    max_age: int = 50,
) -> bool:
    """False when the current waypoint should be replanned.

    Any of: robot within one cell of the waypoint; a newly observed wall on
    the remaining path; the waypoint's frontier dissolved (no unknown
    neighbor left); or the plan is older than `max_age` steps.
    """
    if waypoint is None or path is None:
        return False
    if max(abs(state.pose.x - waypoint.x), abs(state.pose.y - waypoint.y)) <= 1:
        return False
    if age > max_age:
        return False
    for cell in path[path_index:]:
        if observed.cells[cell.y, cell.x] == OCCUPIED:
            return False
    x0, x1 = max(0, waypoint.x - 1), min(observed.width, waypoint.x + 2)
    y0, y1 = max(0, waypoint.y - 1), min(observed.height, waypoint.y + 2)
    if not (observed.cells[y0:y1, x0:x1] == UNKNOWN).any():
        return False
    return True


@dataclass
class EpisodeConfig:
    budget_t: int = 1000
    scorer: str = "mapex"
    sensor: SensorSpec = field(default_factory=SensorSpec)
    raycast: RaycastConfig = field(default_factory=RaycastConfig)
    min_cluster_size: int = 10
    max_waypoint_age: int = 50
    checkpoint_every: int = 100
    collect_checkpoints: bool = False

    def __post_init__(self):
        if self.budget_t < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget_t}")


@dataclass
class StepRow:
    """State at one executed timestep; pose is where the robot sensed."""

    t: int
    x: int
    y: int
    coverage: float
    replanned: bool
    waypoint_x: int | None
    waypoint_y: int | None


@dataclass
class ReplanEvent:
    t: int
    n_clusters: int
    scores: list  # [cx, cy, size, score] per cluster, rank order
    chosen_x: int | None
    chosen_y: int | None
    attempts: int  # candidates tried until one was reachable


@dataclass
class Checkpoint:
    t: int
    observed: OccupancyGrid
    mean: OccupancyGrid | None
    variance: OccupancyGrid | None


@dataclass
class EpisodeRecord:
    start: GridPose
    scorer: str
    budget_t: int
    rows: list[StepRow]
    replans: list[ReplanEvent]
    end_reason: str
    final_pose: GridPose
    final_t: int
    final_coverage: float
    final_observed: OccupancyGrid
    final_prediction_mean: OccupancyGrid | None
    final_prediction_variance: OccupancyGrid | None
    checkpoints: list[Checkpoint]


def run_episode(
    gt: OccupancyGrid,
    start: GridPose,
    cfg: EpisodeConfig,
    ensemble: PredictorEnsemble,
) -> EpisodeRecord:
    """Frontier exploration under a fixed timestep budget.

    Per timestep: sense and integrate; if the waypoint is no longer valid,
    predict with the ensemble, extract and score frontiers, pick the best
    reachable one and plan a path; then advance one step. Ends at the
    budget, when no frontiers remain ("complete"), or when none of the
    scored frontiers is reachable ("stuck").
    """
    from .metrics import building_footprint  # local import breaks the module cycle

    if not gt.in_bounds(start.x, start.y) or gt.at(start) != 0.0:
        raise ValueError(f"start {start} must be a free ground-truth cell")

    observed = new_grid(gt.width, gt.height, gt.resolution)
    footprint = building_footprint(gt)
    fp_count = int(footprint.sum())

    state = RobotState(pose=start, t=0)
    rows: list[StepRow] = []
    replans: list[ReplanEvent] = []
    checkpoints: list[Checkpoint] = []
    waypoint: GridPose | None = None
    path: list[GridPose] | None = None
    path_index = 0
    age = 0
    latest_pset = None
    end_reason = "budget"

    def coverage_now() -> float:
        if fp_count == 0:
            return 100.0
        known = (observed.cells != UNKNOWN) & footprint
        return 100.0 * int(np.count_nonzero(known)) / fp_count

    for t in range(cfg.budget_t):
        scan = simulate_scan(gt, state.pose, cfg.sensor)
        integrate_scan(observed, scan)

        replanned = False
        if not waypoint_valid(
            state, waypoint, path, observed,
            path_index=path_index, age=age, max_age=cfg.max_waypoint_age,
        ):
            replanned = True
            waypoint, path, path_index, age = None, None, 0, 0
            clusters = extract_frontiers(observed, cfg.min_cluster_size)
            if not clusters:
                end_reason = "complete"
                rows.append(StepRow(t, state.pose.x, state.pose.y, coverage_now(),
                                    True, None, None))
                break
            latest_pset = ensemble_predict(ensemble, observed)
            ctx = ScoreContext(
                observed=observed, robot_pose=state.pose,
                raycast=cfg.raycast, prediction_set=latest_pset,
            )
            scores = [score_frontier(c, cfg.scorer, ctx) for c in clusters]
            order = rank_frontiers(clusters, scores, state.pose)
            blocked = observed.cells == OCCUPIED
            attempts = 0
            for idx in order:
                attempts += 1
                cand = clusters[idx].centroid
                p = astar(blocked, state.pose, cand)
                if p is not None:
                    waypoint, path = cand, p
                    break
            replans.append(ReplanEvent(
                t=t, n_clusters=len(clusters),
                scores=[[clusters[i].centroid.x, clusters[i].centroid.y,
                         clusters[i].size, scores[i]] for i in order],
                chosen_x=waypoint.x if waypoint else None,
                chosen_y=waypoint.y if waypoint else None,
                attempts=attempts,
            ))
            if waypoint is None:
                end_reason = "stuck"
                rows.append(StepRow(t, state.pose.x, state.pose.y, coverage_now(),
                                    True, None, None))
                break

        rows.append(StepRow(t, state.pose.x, state.pose.y, coverage_now(),
                            replanned, waypoint.x, waypoint.y))

        if path is not None and path_index + 1 < len(path):
            nxt = path[path_index + 1]
            delta = (nxt.x - state.pose.x, nxt.y - state.pose.y)
            state = apply_action(state, delta, gt)
            if state.pose == nxt:
                path_index += 1
            # else: blocked by an undiscovered wall; next scan reveals it and
            # waypoint_valid forces a replan
        else:
            state = apply_action(state, (0, 0), gt)
        age += 1

        if cfg.collect_checkpoints and cfg.checkpoint_every > 0 and \
                (t + 1) % cfg.checkpoint_every == 0:
            checkpoints.append(Checkpoint(
                t=t + 1,
                observed=observed.copy(),
                mean=latest_pset.mean.copy() if latest_pset else None,
                variance=latest_pset.variance.copy() if latest_pset else None,
            ))

    return EpisodeRecord(
        start=start,
        scorer=cfg.scorer,
        budget_t=cfg.budget_t,
        rows=rows,
        replans=replans,
        end_reason=end_reason,
        final_pose=state.pose,
        final_t=state.t,
        final_coverage=rows[-1].coverage if rows else 0.0,
        final_observed=observed,
        final_prediction_mean=latest_pset.mean if latest_pset else None,
        final_prediction_variance=latest_pset.variance if latest_pset else None,
        checkpoints=checkpoints,
    )
