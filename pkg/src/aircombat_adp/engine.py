"""Episode orchestration: initial states, simultaneous stepping, policies,
termination, trajectory recording and batch evaluation.

Both craft pick their maneuvers from the pre-step state and advance
simultaneously, so the engagement has no move-order asymmetry.  Every
episode is a pure function of (seed, policies, configs).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import learner
from .dynamics import (
    MANEUVERS,
    STATE_DIM,
    AircraftState,
    DynamicsConfig,
    Maneuver,
    maneuver_controls,
    rk4_step_arrays,
    wrap_yaw,
)
from .geometry import (
    CODE_BLUE_WIN,
    CODE_ONGOING,
    CODE_RED_WIN,
    STEP_COL,
    CombatState,
    Outcome,
    Perspective,
    RelativeGeometry,
    RewardConfig,
    features_arrays,
    outcome_codes,
    relative_geometry,
    reward_arrays,
    terminal_status,
)
from .learner import ValueModel

WORKERS_ENV_VAR = "AIRCOMBAT_WORKERS"


@dataclass(frozen=True)
class EngagementConfig:
    """Dynamics and reward configuration shared by one engagement."""

    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    max_steps: int = 200


@dataclass(frozen=True)
class CraftInit:
    """Mean initial state of one craft (angles in radians)."""

    v: float
    x: float
    y: float
    z: float
    theta: float
    psi: float


@dataclass(frozen=True)
class InitialStateDistribution:
    """Randomized engagement start: Gaussian positions, uniform attitude angles.

    Velocities stay at their means; roll starts at zero.
    """

    red: CraftInit = CraftInit(250.0, 0.0, 0.0, 2900.0, 0.0, math.radians(45.0))
    blue: CraftInit = CraftInit(204.0, 3000.0, 3000.0, 2800.0, 0.0, math.radians(-135.0))
    position_sigma: float = 10.0
    angle_halfwidth: float = math.radians(3.0)
    # Yaw half-range; None reuses angle_halfwidth.  Training configs widen
    # this (up to pi) so the sample corpus covers all relative headings.
    psi_halfwidth: float | None = None

    def __post_init__(self) -> None:
        if self.position_sigma < 0.0 or self.angle_halfwidth < 0.0:
            raise ValueError("position_sigma and angle_halfwidth must be non-negative")
        if self.psi_halfwidth is not None and self.psi_halfwidth < 0.0:
            raise ValueError("psi_halfwidth must be non-negative")


def _sample_craft(mean: CraftInit, dist: InitialStateDistribution, rng) -> AircraftState:
    x = rng.normal(mean.x, dist.position_sigma)
    y = rng.normal(mean.y, dist.position_sigma)
    z = rng.normal(mean.z, dist.position_sigma)
    hw = dist.angle_halfwidth
    phw = dist.psi_halfwidth if dist.psi_halfwidth is not None else hw
    theta = rng.uniform(mean.theta - hw, mean.theta + hw) if hw > 0.0 else mean.theta
    psi = rng.uniform(mean.psi - phw, mean.psi + phw) if phw > 0.0 else mean.psi
    return AircraftState(
        v=mean.v, x=x, y=y, z=z, theta=theta, psi=float(wrap_yaw(psi)), bank=0.0
    )


def sample_initial_state(dist: InitialStateDistribution, rng) -> CombatState:
    """Draw one randomized engagement start state."""
    return CombatState(
        red=_sample_craft(dist.red, dist, rng),
        blue=_sample_craft(dist.blue, dist, rng),
        step=0,
    )


def _control_tables(cfg: DynamicsConfig):
    controls = [maneuver_controls(m, cfg) for m in MANEUVERS]
    return (
        np.array([c.nx for c in controls]),
        np.array([c.nz for c in controls]),
        np.array([c.bank for c in controls]),
    )


def advance_arrays(arr: np.ndarray, red_idx, blue_idx, cfg: DynamicsConfig) -> np.ndarray:
    """Advance a (n, 15) combat array one step; both craft move simultaneously.

    ``red_idx``/``blue_idx`` are maneuver indices, scalar or per-row arrays.
    """
    nx, nz, bank = _control_tables(cfg)
    out = np.empty_like(arr)
    out[..., :STATE_DIM] = rk4_step_arrays(
        arr[..., :STATE_DIM], nx[red_idx], nz[red_idx], bank[red_idx], cfg
    )
    out[..., STATE_DIM : 2 * STATE_DIM] = rk4_step_arrays(
        arr[..., STATE_DIM : 2 * STATE_DIM], nx[blue_idx], nz[blue_idx], bank[blue_idx], cfg
    )
    out[..., STEP_COL] = arr[..., STEP_COL] + 1.0
    return out


def step_combat(
    cs: CombatState, red_m: Maneuver, blue_m: Maneuver, cfg: DynamicsConfig
) -> CombatState:
    """One simultaneous decision step of the paired system."""
    arr = advance_arrays(cs.as_array()[None, :], red_m.value, blue_m.value, cfg)
    return CombatState.from_array(arr[0])


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantManeuverPolicy:
    """Always flies the same maneuver (e.g. the straight-line opponent)."""

    maneuver: Maneuver = Maneuver.CONTINUED

    def describe(self) -> str:
        return f"constant:{self.maneuver.name.lower()}"

    def choose_batch(self, arr, perspective, cfg: EngagementConfig, rng) -> np.ndarray:
        return np.full(len(arr), self.maneuver.value, dtype=np.int64)


@dataclass(frozen=True)
class UniformRandomPolicy:
    """Picks one of the seven maneuvers uniformly at random each step."""

    def describe(self) -> str:
        return "random"

    def choose_batch(self, arr, perspective, cfg: EngagementConfig, rng) -> np.ndarray:
        if rng is None:
            raise ValueError("UniformRandomPolicy requires an rng")
        return rng.integers(0, len(MANEUVERS), size=len(arr))


@dataclass(frozen=True)
class GreedyValuePolicy:
    """One-step look-ahead greedy policy under a fitted value model.

    The look-ahead assumes the opponent holds ``assumed_opponent`` for the
    single predicted step; the environment's real opponent can differ.
    """

    model: ValueModel
    assumed_opponent: Maneuver = Maneuver.CONTINUED
    terminal_bonus: float = 0.0

    def describe(self) -> str:
        return "greedy-value"

    def choose_batch(self, arr, perspective, cfg: EngagementConfig, rng) -> np.ndarray:
        if self.model.weights is None:
            raise learner.UnfittedModelError("greedy policy requires a fitted model")
        env = CombatEnvironment(
            engagement=cfg,
            opponent=ConstantManeuverPolicy(self.assumed_opponent),
            perspective=perspective,
            terminal_bonus=self.terminal_bonus,
        )
        return np.argmax(learner.action_values(self.model, env, arr, rng=rng), axis=1)


class SelfPlayOpponentPolicy:
    """Training-time opponent that tracks the evolving value model.

    Before the first fit it flies continued; afterwards it plays greedily
    under the latest fitted model.  Mutable on purpose: the training loop
    swaps the model in between iterations.
    """

    def __init__(self) -> None:
        self.model: ValueModel | None = None

    def describe(self) -> str:
        return "self"

    def set_model(self, model: ValueModel) -> None:
        self.model = model

    def choose_batch(self, arr, perspective, cfg: EngagementConfig, rng) -> np.ndarray:
        if self.model is None or self.model.weights is None:
            return ConstantManeuverPolicy().choose_batch(arr, perspective, cfg, rng)
        return GreedyValuePolicy(self.model).choose_batch(arr, perspective, cfg, rng)


def policy_from_spec(spec: str, model: ValueModel | None = None):
    """Parse an opponent descriptor: constant:<maneuver> | random | self."""
    if spec == "random":
        return UniformRandomPolicy()
    if spec == "self":
        if model is None:
            raise ValueError("opponent 'self' requires a fitted model")
        return GreedyValuePolicy(model)
    if spec.startswith("constant:"):
        name = spec.split(":", 1)[1].upper()
        try:
            return ConstantManeuverPolicy(Maneuver[name])
        except KeyError:
            raise ValueError(f"unknown maneuver {name.lower()!r} in opponent spec") from None
    raise ValueError(f"unknown opponent spec {spec!r}")


# ---------------------------------------------------------------------------
# Learner-facing environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CombatEnvironment:
    """Deterministic transition oracle used by the fitted-value-iteration loop.

    The learning side (``perspective``) chooses the action; the other craft
    follows ``opponent`` evaluated at the pre-step state.  Rewards are the
    learning side's shaped reward at the successor, plus/minus
    ``terminal_bonus`` on a terminal win/loss.
    """

    engagement: EngagementConfig = field(default_factory=EngagementConfig)
    init_dist: InitialStateDistribution = field(default_factory=InitialStateDistribution)
    opponent: object = field(default_factory=ConstantManeuverPolicy)
    perspective: Perspective = Perspective.RED
    terminal_bonus: float = 0.0
    d_scale: float = 3000.0

    @property
    def actions(self):
        return MANEUVERS

    @property
    def n_actions(self) -> int:
        return len(MANEUVERS)

    @property
    def n_raw_features(self) -> int:
        return 5

    @property
    def feature_norms(self) -> np.ndarray:
        rc = self.engagement.reward
        return np.array([math.pi, math.pi, rc.h_scale, rc.v_scale, self.d_scale])

    @property
    def reward_cfg(self) -> RewardConfig:
        return self.engagement.reward

    def pack(self, states) -> np.ndarray:
        rows = [s.as_array() if isinstance(s, CombatState) else np.asarray(s) for s in states]
        return np.stack(rows)

    def initial_states(self, n: int, rng) -> np.ndarray:
        return self.pack([sample_initial_state(self.init_dist, rng) for _ in range(n)])

    def is_terminal(self, batch: np.ndarray) -> np.ndarray:
        codes = outcome_codes(batch, self.engagement.max_steps, self.engagement.reward)
        return codes != CODE_ONGOING

    def raw_features(self, batch: np.ndarray) -> np.ndarray:
        return features_arrays(batch, self.perspective)

    def step_all(self, batch: np.ndarray, action_index: int, rng=None):
        other = (
            Perspective.BLUE if self.perspective is Perspective.RED else Perspective.RED
        )
        opp_idx = self.opponent.choose_batch(batch, other, self.engagement, rng)
        if self.perspective is Perspective.RED:
            nxt = advance_arrays(batch, action_index, opp_idx, self.engagement.dynamics)
        else:
            nxt = advance_arrays(batch, opp_idx, action_index, self.engagement.dynamics)
        rew = reward_arrays(nxt, self.perspective, self.engagement.reward)
        codes = outcome_codes(nxt, self.engagement.max_steps, self.engagement.reward)
        if self.terminal_bonus != 0.0:
            win = CODE_RED_WIN if self.perspective is Perspective.RED else CODE_BLUE_WIN
            lose = CODE_BLUE_WIN if self.perspective is Perspective.RED else CODE_RED_WIN
            rew = rew + self.terminal_bonus * ((codes == win).astype(float)
                                               - (codes == lose).astype(float))
        return nxt, rew, codes != CODE_ONGOING

    def notify_model_update(self, model: ValueModel) -> None:
        """Hand the freshly fitted model to a self-play opponent, if any."""
        set_model = getattr(self.opponent, "set_model", None)
        if set_model is not None:
            set_model(model)


def build_training_env(training_cfg, engagement: EngagementConfig,
                       init_dist: InitialStateDistribution) -> CombatEnvironment:
    """Environment for training the red side per a TrainingConfig."""
    if training_cfg.opponent == "self":
        opponent = SelfPlayOpponentPolicy()
    else:
        opponent = policy_from_spec(training_cfg.opponent)
    return CombatEnvironment(
        engagement=engagement,
        init_dist=init_dist,
        opponent=opponent,
        perspective=Perspective.RED,
        terminal_bonus=training_cfg.terminal_bonus,
        d_scale=training_cfg.d_scale,
    )


# ---------------------------------------------------------------------------
# Episodes and batch evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRow:
    """One recorded decision point (or the terminal state, with no maneuvers)."""

    step: int
    t: float
    red: AircraftState
    blue: AircraftState
    maneuver_red: Maneuver | None
    maneuver_blue: Maneuver | None
    geom_red: RelativeGeometry
    geom_blue: RelativeGeometry
    reward_red: float
    reward_blue: float


@dataclass(frozen=True)
class EpisodeRecord:
    """Full trajectory of one engagement plus its outcome and seed."""

    rows: tuple[EpisodeRow, ...]
    outcome: Outcome
    seed: int


def _make_row(
    cs: CombatState,
    m_red: Maneuver | None,
    m_blue: Maneuver | None,
    cfg: EngagementConfig,
) -> EpisodeRow:
    geom_red = relative_geometry(cs, Perspective.RED)
    geom_blue = relative_geometry(cs, Perspective.BLUE)
    arr = cs.as_array()
    return EpisodeRow(
        step=cs.step,
        t=cs.step * cfg.dynamics.dt,
        red=cs.red,
        blue=cs.blue,
        maneuver_red=m_red,
        maneuver_blue=m_blue,
        geom_red=geom_red,
        geom_blue=geom_blue,
        reward_red=float(reward_arrays(arr, Perspective.RED, cfg.reward)),
        reward_blue=float(reward_arrays(arr, Perspective.BLUE, cfg.reward)),
    )


def run_episode(
    red_policy,
    blue_policy,
    dist: InitialStateDistribution,
    cfg: EngagementConfig,
    seed: int,
) -> EpisodeRecord:
    """Play one engagement to termination and record every state visited.

    The terminal check precedes each decision, so a winning initial draw
    produces a single-row record.
    """
    rng = np.random.default_rng(seed)
    cs = sample_initial_state(dist, rng)
    rows: list[EpisodeRow] = []
    while True:
        status = terminal_status(cs, cfg.max_steps, cfg.reward)
        if status is not Outcome.ONGOING:
            rows.append(_make_row(cs, None, None, cfg))
            return EpisodeRecord(rows=tuple(rows), outcome=status, seed=seed)
        batch = cs.as_array()[None, :]
        red_m = MANEUVERS[int(red_policy.choose_batch(batch, Perspective.RED, cfg, rng)[0])]
        blue_m = MANEUVERS[int(blue_policy.choose_batch(batch, Perspective.BLUE, cfg, rng)[0])]
        rows.append(_make_row(cs, red_m, blue_m, cfg))
        cs = step_combat(cs, red_m, blue_m, cfg.dynamics)


@dataclass(frozen=True)
class EvaluationSummary:
    """Aggregate outcome statistics over a batch of independent episodes."""

    n_episodes: int
    counts: dict
    rates: dict
    mean_steps: float
    mean_terminal_reward_red: float
    mean_terminal_reward_blue: float
    seed: int
    episode_seeds: tuple[int, ...]


def episode_seeds(seed: int, n_episodes: int) -> tuple[int, ...]:
    """Per-episode seeds derived deterministically from one master seed."""
    return tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(n_episodes))


def _episode_stats(args):
    red_policy, blue_policy, dist, cfg, ep_seed = args
    rec = run_episode(red_policy, blue_policy, dist, cfg, ep_seed)
    last = rec.rows[-1]
    return rec.outcome.value, last.step, last.reward_red, last.reward_blue


def evaluate_policies(
    red_policy,
    blue_policy,
    dist: InitialStateDistribution,
    cfg: EngagementConfig,
    n_episodes: int,
    seed: int,
    workers: int | None = None,
) -> EvaluationSummary:
    """Run independent seeded episodes and aggregate outcome statistics.

    ``workers`` defaults to the AIRCOMBAT_WORKERS environment variable (or 1).
    Results are independent of worker count because each episode derives its
    own seed.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    seeds = episode_seeds(seed, n_episodes)
    jobs = [(red_policy, blue_policy, dist, cfg, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_stats, jobs, chunksize=8))
    else:
        results = [_episode_stats(j) for j in jobs]
    counts = {o.value: 0 for o in (Outcome.RED_WIN, Outcome.BLUE_WIN, Outcome.DRAW)}
    for outcome, _, _, _ in results:
        counts[outcome] += 1
    return EvaluationSummary(
        n_episodes=n_episodes,
        counts=counts,
        rates={k: v / n_episodes for k, v in counts.items()},
        mean_steps=float(np.mean([r[1] for r in results])),
        mean_terminal_reward_red=float(np.mean([r[2] for r in results])),
        mean_terminal_reward_blue=float(np.mean([r[3] for r in results])),
        seed=seed,
        episode_seeds=seeds,
    )
