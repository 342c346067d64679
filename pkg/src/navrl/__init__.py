"""navrl: desk-scale 2D lidar navigation policies, trainers, and baselines.

Modules:
    worldsim          occupancy maps, lidar, unicycle dynamics, noise
    planning          PRM roadmaps and guidance-path bookkeeping
    moving_obstacles  social-force pedestrian crowds
    tasks             point-goal / path-following environments and rewards
    neural            flat-parameter MLPs with exact gradients, Adam
    ddpg              off-policy actor-critic training loop
    cmaes             covariance matrix adaptation optimizer
    shaping           two-phase reward-weight / network-width search
    apf_baseline      potential-field comparison controller
    evaluation        sweep harness, metrics, trajectory replay
    cli               command-line front end
"""

from .worldsim import (Action, InvalidPose, InvalidSpec, LidarScan, MapSpec,
                       NoiseParams, OccupancyMap, RobotState, beam_angles,
                       check_collision, clearance, generate_map, load_map,
                       localize, raycast, save_map, sense, step_dynamics)
from .planning import (NoPath, Path, Roadmap, RoadmapConfig, interpolate,
                       load_path, partial_path_observation, sample_free_point,
                       save_path, update_reached)
from .moving_obstacles import Crowd, SfmParams
from .tasks import (EpisodeResult, NavEnv, StepContext, TaskConfig,
                    load_trajectory, p2p_reward_terms, pf_reward_terms,
                    run_episode, save_trajectory)
from .neural import (ActorNet, Adam, CriticNet, load_policy, save_policy,
                     soft_update)
from .ddpg import (ActorPolicy, DdpgConfig, NonFiniteLoss, ReplayBuffer,
                   TrainResult, evaluate_policy, load_curve, save_curve,
                   train)
from .cmaes import CmaEs, minimize
from .shaping import (FullShapingResult, ShapingConfig, ShapingResult,
                      TrialRecord, load_trial_db, run_full_shaping,
                      shape_networks, shape_rewards, shaping_report,
                      widths_from_params)
from .apf_baseline import (ApfP2PPolicy, ApfParams, ApfPolicy, Stuck,
                           apf_action, apf_p2p_action)
from .evaluation import (EpisodeRecord, MetricsRow, ScriptedPolicy,
                         SweepSpec, episode_seed, episodes_to_csv,
                         make_policy, metrics_to_csv, recompute_row, replay,
                         replay_file, run_sweep)

__version__ = "0.1.0"

__all__ = [
    "Action", "ActorNet", "ActorPolicy", "Adam", "ApfP2PPolicy",
    "ApfParams", "ApfPolicy", "CmaEs", "CriticNet", "Crowd", "DdpgConfig",
    "EpisodeRecord", "EpisodeResult", "FullShapingResult", "InvalidPose",
    "InvalidSpec", "LidarScan", "MapSpec", "MetricsRow", "NavEnv",
    "NoPath", "NoiseParams", "NonFiniteLoss", "OccupancyMap", "Path",
    "ReplayBuffer", "Roadmap", "RoadmapConfig", "RobotState",
    "ScriptedPolicy", "SfmParams", "ShapingConfig", "ShapingResult",
    "StepContext", "Stuck", "SweepSpec", "TaskConfig", "TrainResult",
    "TrialRecord", "apf_action", "apf_p2p_action", "beam_angles",
    "check_collision", "clearance", "episode_seed", "episodes_to_csv",
    "evaluate_policy", "generate_map", "interpolate", "load_curve",
    "load_map", "load_path", "load_policy", "load_trajectory",
    "load_trial_db", "localize", "make_policy", "metrics_to_csv",
    "minimize", "p2p_reward_terms", "partial_path_observation",
    "pf_reward_terms", "raycast", "recompute_row", "replay", "replay_file",
    "run_episode", "run_full_shaping", "run_sweep", "sample_free_point",
    "save_curve", "save_map", "save_path", "save_policy", "save_trajectory",
    "sense", "shape_networks", "shape_rewards", "shaping_report",
    "soft_update", "step_dynamics", "train", "update_reached",
    "widths_from_params",
]
