"""Social-aware risk-field trajectory planning.

A Gaussian driving-risk field swept along each candidate trajectory is
multiplied against per-step obstacle cost maps built from multi-modal
predictions; the planner picks the cheapest candidate whose accumulated
risk stays under a calibrated threshold.  A deterministic scenario
simulator and a batch evaluation harness round out the package.
"""
from .core import (DEFAULT_LIMITS, KinematicLimits, OrientedBox, Pose,
                   Trajectory, VehicleState, bicycle_step, boxes_overlap,
                   footprint_box, rollout)
from .costmap import CostMapParams, build_cost_map, obstacle_stamp_grid, \
    risk_level
from .evaluate import (BatchReport, EpisodeResult, HumannessComponents,
                       humanness, run_batch, run_episode, time_metric)
from .planner import (PlanResult, PlanSnapshot, PlannerConfig, ScoreWeights,
                      VARIANTS, default_risk_threshold, plan, replan_loop,
                      sample_candidates)
from .prediction import (AgentHistory, PredictionMode, PredictionSet,
                         freeze_predictions, predict_cv,
                         predict_interactive, predict_lane_follow)
from .riskeval import (HorizonRisk, RiskEvaluator, export_sadrf_heatmap,
                       horizon_risk, step_risk)
from .riskfield import (ArcPath, DrfParams, GridSpec, RiskGrid, arc_path,
                        eval_field, eval_field_grid, height_a, rasterize,
                        width_sigma)
from .rng import Xoshiro256StarStar, mix_seed
from .road import DrivableGridCache, Lane, RoadMap
from .sim import (EGO_ID, HdvSpawn, IdmParams, ScenarioConfig,
                  ScenarioConfigError, World, build_scenario, idm_accel,
                  load_scenario, parse_scenario)

__version__ = "0.1.0"
