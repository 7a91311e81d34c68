import heapq
import math

import numpy as np
import pytest

from exploresim import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    EpisodeConfig,
    GridPose,
    OccupancyGrid,
    PassThroughPredictor,
    PredictorEnsemble,
    RaycastConfig,
    RobotState,
    SensorSpec,
    astar,
    new_grid,
    path_cost,
    run_episode,
    waypoint_valid,
)

SQRT2 = math.sqrt(2.0)


def ucs_cost_oracle(blocked, start, goal):
    """Independent uniform-cost search over the same move rules; returns the
    optimal cost or None."""
    h, w = blocked.shape
    if blocked[goal[1], goal[0]]:
        return None
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if (x, y) == goal:
            return d
        if d > dist.get((x, y), float("inf")):
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == dy == 0:
                    continue
                nx, ny = x + dx, y + dy
                if not (0 <= nx < w and 0 <= ny < h) or blocked[ny, nx]:
                    continue
                if dx and dy and blocked[y, nx] and blocked[ny, x]:
                    continue
                nd = d + (SQRT2 if dx and dy else 1.0)
                if nd < dist.get((nx, ny), float("inf")) - 1e-12:
                    dist[(nx, ny)] = nd
                    heapq.heappush(heap, (nd, (nx, ny)))
    return None


def test_astar_start_equals_goal():
    blocked = np.zeros((5, 5), dtype=bool)
    path = astar(blocked, GridPose(2, 2), GridPose(2, 2))
    assert path == [GridPose(2, 2)]
    assert path_cost(path) == 0.0


def test_astar_pure_diagonal_cost():
    blocked = np.zeros((10, 10), dtype=bool)
    path = astar(blocked, GridPose(0, 0), GridPose(9, 9))
    assert path[0] == GridPose(0, 0) and path[-1] == GridPose(9, 9)
    assert path_cost(path) == pytest.approx(9 * SQRT2, abs=1e-9)


def test_astar_paths_are_8_connected_and_avoid_blocked():
    rng = np.random.default_rng(41)
    blocked = rng.random((20, 20)) < 0.25
    blocked[0, 0] = blocked[19, 19] = False
    path = astar(blocked, GridPose(0, 0), GridPose(19, 19))
    if path is not None:
        for a, b in zip(path, path[1:]):
            assert max(abs(a.x - b.x), abs(a.y - b.y)) == 1
            assert not blocked[b.y, b.x]


def test_astar_no_corner_cutting_through_closed_corner():
    # (1,0) and (0,1) blocked: the diagonal (0,0)->(1,1) must be forbidden.
    blocked = np.zeros((3, 3), dtype=bool)
    blocked[0, 1] = blocked[1, 0] = True
    path = astar(blocked, GridPose(0, 0), GridPose(1, 1))
    assert path is None  # fully walled corner, nothing else reaches (1,1)


def test_astar_single_blocked_orthogonal_allows_diagonal():
    blocked = np.zeros((3, 3), dtype=bool)
    blocked[0, 1] = True  # only one of the two orthogonals
    path = astar(blocked, GridPose(0, 0), GridPose(1, 1))
    assert path_cost(path) == pytest.approx(SQRT2)


def test_astar_unreachable_returns_none():
    blocked = np.zeros((7, 7), dtype=bool)
    blocked[3, :] = True  # full wall
    assert astar(blocked, GridPose(1, 1), GridPose(1, 5)) is None


def test_astar_start_blocked_raises():
    blocked = np.ones((3, 3), dtype=bool)
    with pytest.raises(ValueError):
        astar(blocked, GridPose(0, 0), GridPose(2, 2))


def test_astar_cost_matches_ucs_oracle_on_random_maps():
    rng = np.random.default_rng(42)
    agree_paths = 0
    for _ in range(200):
        blocked = rng.random((32, 32)) < 0.2
        sx, sy = rng.integers(0, 32, size=2)
        gx, gy = rng.integers(0, 32, size=2)
        blocked[sy, sx] = False
        path = astar(blocked, GridPose(int(sx), int(sy)), GridPose(int(gx), int(gy)))
        oracle = ucs_cost_oracle(blocked, (int(sx), int(sy)), (int(gx), int(gy)))
        if oracle is None:
            assert path is None
        else:
            assert path is not None
            assert path_cost(path) == pytest.approx(oracle, abs=1e-9)
            agree_paths += 1
    assert agree_paths > 50  # the fixture produces plenty of solvable cases


def _mk_observed(n=16):
    return new_grid(n, n, 0.1)


def test_waypoint_invalid_on_arrival():
    observed = _mk_observed()
    path = [GridPose(5, 5), GridPose(6, 5)]
    state = RobotState(GridPose(5, 5))
    observed.cells[:, :] = UNKNOWN
    observed.cells[5, 6] = FREE
    assert not waypoint_valid(state, GridPose(6, 5), path, observed)


def test_waypoint_invalid_when_new_wall_crosses_path():
    observed = _mk_observed()
    path = [GridPose(1, 1), GridPose(2, 1), GridPose(3, 1), GridPose(4, 1)]
    observed.cells[1, 3] = OCCUPIED
    state = RobotState(GridPose(1, 1))
    assert not waypoint_valid(state, GridPose(4, 1), path, observed)
    # cells already passed do not invalidate the plan
    assert waypoint_valid(state, GridPose(4, 1), path, observed, path_index=3)


def test_waypoint_invalid_when_frontier_dissolves():
    observed = _mk_observed()
    observed.cells[:, :] = FREE  # fully known: waypoint has no unknown neighbor
    path = [GridPose(1, 1), GridPose(2, 2), GridPose(3, 3), GridPose(4, 4), GridPose(5, 5)]
    state = RobotState(GridPose(1, 1))
    assert not waypoint_valid(state, GridPose(5, 5), path, observed)


def test_waypoint_invalid_when_too_old():
    observed = _mk_observed()
    observed.cells[6, 6] = FREE  # keep an unknown neighbor around the waypoint
    path = [GridPose(1, 1), GridPose(2, 2), GridPose(3, 3), GridPose(4, 4),
            GridPose(5, 5), GridPose(6, 6)]
    state = RobotState(GridPose(1, 1))
    assert waypoint_valid(state, GridPose(6, 6), path, observed, age=3, max_age=50)
    assert not waypoint_valid(state, GridPose(6, 6), path, observed, age=51, max_age=50)


def test_waypoint_valid_fresh_plan():
    observed = _mk_observed()
    observed.cells[6, 6] = FREE
    path = [GridPose(1, 1), GridPose(2, 2), GridPose(3, 3), GridPose(4, 4),
            GridPose(5, 5), GridPose(6, 6)]
    state = RobotState(GridPose(1, 1))
    assert waypoint_valid(state, GridPose(6, 6), path, observed, age=3)


def _single_room(n=29):
    cells = np.zeros((n, n))
    cells[0, :] = cells[-1, :] = 1.0
    cells[:, 0] = cells[:, -1] = 1.0
    return OccupancyGrid(cells, 0.1)


def _passthrough_ensemble(n=3):
    return PredictorEnsemble([PassThroughPredictor() for _ in range(n)])


def _small_cfg(budget, scorer="nearest", **kw):
    return EpisodeConfig(
        budget_t=budget,
        scorer=scorer,
        sensor=SensorSpec(range_lambda=3.0, n_rays=360),
        raycast=RaycastConfig(epsilon=0.8, n_rays=24, range_lambda=3.0),
        min_cluster_size=1,
        **kw,
    )


def test_episode_single_visible_room_completes_fast():
    gt = _single_room()
    rec = run_episode(gt, GridPose(14, 14), _small_cfg(50), _passthrough_ensemble())
    assert rec.end_reason == "complete"
    assert rec.final_coverage == pytest.approx(100.0)
    assert rec.final_t <= 5
    assert len(rec.replans) <= 2


def test_episode_budget_zero_has_only_initial_state():
    gt = _single_room()
    rec = run_episode(gt, GridPose(5, 5), _small_cfg(0), _passthrough_ensemble())
    assert rec.rows == []
    assert rec.final_t == 0
    assert rec.final_pose == GridPose(5, 5)
    assert rec.final_coverage == 0.0


def test_episode_row_count_bounded_by_budget():
    gt = _single_room()
    for budget in (1, 3, 10):
        rec = run_episode(gt, GridPose(7, 7), _small_cfg(budget), _passthrough_ensemble())
        assert len(rec.rows) <= budget + 1
        assert all(r.t == i for i, r in enumerate(rec.rows))


def test_episode_coverage_is_monotone():
    gt = _single_room(41)
    gt.cells[20, 5:35] = 1.0  # interior wall forces some travel
    gt.cells[20, 18:22] = 0.0
    rec = run_episode(gt, GridPose(5, 5), _small_cfg(300), _passthrough_ensemble())
    cov = [r.coverage for r in rec.rows]
    assert all(b >= a - 1e-9 for a, b in zip(cov, cov[1:]))
    assert rec.final_coverage == pytest.approx(100.0)


def test_episode_rejects_bad_start():
    gt = _single_room()
    with pytest.raises(ValueError):
        run_episode(gt, GridPose(0, 0), _small_cfg(5), _passthrough_ensemble())


def test_scorer_isolation_first_scan_identical():
    gt = _single_room(41)
    gt.cells[20, 5:35] = 1.0
    gt.cells[20, 18:22] = 0.0
    recs = {}
    for scorer in ("mapex", "nearest"):
        recs[scorer] = run_episode(gt, GridPose(5, 5), _small_cfg(1, scorer),
                                   _passthrough_ensemble())
    a, b = recs["mapex"], recs["nearest"]
    assert a.final_observed == b.final_observed
    assert a.rows[0].coverage == b.rows[0].coverage


def test_episode_checkpoints_collected():
    gt = _single_room(41)
    gt.cells[20, 5:35] = 1.0
    gt.cells[20, 18:22] = 0.0
    cfg = _small_cfg(25, checkpoint_every=10, collect_checkpoints=True)
    rec = run_episode(gt, GridPose(5, 5), cfg, _passthrough_ensemble())
    ts = [cp.t for cp in rec.checkpoints]
    assert ts == [t for t in (10, 20) if t <= rec.final_t]
