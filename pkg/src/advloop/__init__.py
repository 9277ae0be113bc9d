"""Closed-loop adversarial evaluation for driving planners.

Scenario schema and synthesis, kinematic trajectory execution, multimodal
adversarial candidate selection, PDMS-family metrics, a two-episode
evaluation harness with an external-planner wire protocol, and a
flow-matching sampling kernel.
"""

from .adversary import (
    AdversaryConfig,
    Candidate,
    CandidateSet,
    ScoredCandidate,
    adversarial_score,
    first_collision_step,
    generate_candidates,
    jerk_penalty,
    pick_adversary,
    select_adversarial,
)
from .dynamics import (
    SIM_DT,
    KinematicLimits,
    Trajectory,
    VehicleState,
    clamp_kinematics,
    footprint,
    integrate_profile,
    obb_distance,
    obb_overlap,
    resample_trajectory,
    wrap_angle,
)
from .flowmatch import (
    FlowState,
    GaussianMixtureOracle,
    GaussianOracle,
    Schedule,
    cfg_combine,
    dm_to_fm_state,
    dm_to_fm_time,
    endpoint_error_sweep,
    euler_step,
    fm_loss,
    gaussian_dm_v_theta,
    gaussian_oracle_velocity,
    sample,
    v_dm_to_v_fm,
)
from .metrics import (
    AgentFrame,
    FrameMetrics,
    MetricWeights,
    SliceReport,
    aggregate_slice,
    compute_pdms,
    frame_metrics,
    slice_completion,
)
from .scenario import (
    MapData,
    RoutePath,
    Scenario,
    ScenarioFormatError,
    ScenarioValidationError,
    AgentTrack,
    load_scenario,
    point_in_drivable,
    save_scenario,
    synth_scenario,
    validate_scenario,
)

__version__ = "0.1.0"
