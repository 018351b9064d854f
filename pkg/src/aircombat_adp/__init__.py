"""One-on-one 3-D air-combat simulation and an online maneuvering policy
learned by fitted value iteration over trajectory-sampled combat states."""

from .dynamics import (
    AircraftState,
    ControlInput,
    DegenerateStateError,
    DynamicsConfig,
    MANEUVERS,
    Maneuver,
    StateDerivative,
    maneuver_controls,
    rk4_step,
    specific_energy,
    state_derivative,
)
from .engine import (
    CombatEnvironment,
    ConstantManeuverPolicy,
    CraftInit,
    EngagementConfig,
    EpisodeRecord,
    EpisodeRow,
    EvaluationSummary,
    GreedyValuePolicy,
    InitialStateDistribution,
    SelfPlayOpponentPolicy,
    UniformRandomPolicy,
    build_training_env,
    evaluate_policies,
    policy_from_spec,
    run_episode,
    sample_initial_state,
    step_combat,
)
from .geometry import (
    CoincidentPositionError,
    CombatState,
    Outcome,
    Perspective,
    RelativeGeometry,
    RewardConfig,
    distance_angle_reward,
    features,
    is_dominated,
    relative_geometry,
    scaled_component_rewards,
    terminal_status,
    total_reward,
)
from .learner import (
    IterationDiagnostics,
    SampleSet,
    SingularFitError,
    TrainingConfig,
    UnfittedModelError,
    ValueModel,
    bellman_targets,
    evaluate,
    expand_features,
    fit_value_iteration,
    greedy_action,
    least_squares_fit,
    trajectory_sample,
)
from .persist import (
    ConfigError,
    CsvFormatError,
    ModelFileError,
    RunConfig,
    dump_run_config,
    load_model,
    load_run_config,
    read_episode_csv,
    save_episode_csv,
    save_model,
)

__version__ = "0.1.0"
