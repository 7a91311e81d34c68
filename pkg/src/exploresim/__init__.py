"""2D indoor exploration simulator with prediction-driven frontier planning."""

from .errors import (
    ConfigError,
    EnsembleError,
    ExternalPredictorError,
    InvalidStateError,
    PgmParseError,
)
from .frontier import (
    SCORER_KINDS,
    FrontierCluster,
    ScoreContext,
    extract_frontiers,
    score_frontier,
    select_frontier,
)
from .grid import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    GridPose,
    OccupancyGrid,
    grid_to_world,
    load_pgm,
    new_grid,
    save_pgm,
    world_to_grid,
)
from .infogain import (
    RaycastConfig,
    VisibilityMask,
    deterministic_raycast,
    info_gain,
    probabilistic_raycast,
    visibility_mask,
)
from .metrics import (
    auc,
    building_footprint,
    coverage,
    iou_occupied,
    topological_understanding,
)
from .planner import EpisodeConfig, EpisodeRecord, astar, path_cost, run_episode, waypoint_valid
from .predict import (
    ExternalPredictor,
    NoisyOraclePredictor,
    PassThroughPredictor,
    PatchInpaintingPredictor,
    PredictionSet,
    PredictorEnsemble,
    ensemble_predict,
    external_predict,
    predict,
)
from .world import (
    ACTIONS,
    RobotState,
    Scan,
    SensorSpec,
    apply_action,
    generate_floorplan,
    integrate_scan,
    simulate_scan,
)

__version__ = "0.1.0"
