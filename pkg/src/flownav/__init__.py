"""flownav: navigation flow fields on 2D semantic maps.

Turns semantic rasters into goal-conditioned flow fields and reference
trajectories, integrates trajectories out of any flow field, and evaluates
both with a fixed metric protocol, on procedurally generated scenes.
"""

from .errors import (
    ConfigurationError,
    FieldFormatError,
    FlowNavError,
    InternalConsistencyError,
    LabelClassificationError,
    SceneGenerationError,
    TargetNotFoundError,
    UnreachableGoalError,
    UnreachableSceneError,
    UnreachableStartError,
)
from .field_gen import (
    Annotation,
    AnnotationConfig,
    GoalSpec,
    annotate,
    compute_goal,
    flow_field,
    potential,
    resample_arclength,
    sample_start,
)
from .geodesic import GeodesicResult, backtrack, cost_map, geodesic, pixel_length_from_pred
from .grid_core import (
    LabelMapping,
    ObjectInstance,
    SemanticMap,
    UNREACHABLE,
    bilinear_sample,
    dtf,
    dto,
    extract_free,
    field_from_bytes,
    field_to_bytes,
    load_field,
    load_scene,
    norm_to_pixel,
    save_field,
    save_scene,
)
from .metrics import (
    MetricsReport,
    aggregate,
    collision,
    curvature,
    evaluate_episode,
    fge,
    field_metrics,
    plr,
)
from .planner_baseline import PlannerConfig, astar, inflate_and_rasterize, side_goal
from .rollout import GridFieldProvider, RolloutConfig, euler_rollout, query_grid, rollout_field
from .scene_gen import Instruction, SceneSpec, gen_instruction, gen_scene, parse_instruction
from .supervision import (
    SampleBatch,
    direction_loss,
    magnitude_loss,
    sample_targets,
    stratified_sample,
    total_loss,
)

__version__ = "0.1.0"
