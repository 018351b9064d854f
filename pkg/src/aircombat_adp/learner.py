"""Fitted value iteration over sampled states.

The learner is generic over an environment object with this duck-typed
surface (see ``engine.CombatEnvironment`` for the production one and the
tabular MDP used in tests for the minimal one):

* ``actions`` — sequence of action labels; ``n_actions`` — its length
* ``pack(states)`` — list of states -> batch array
* ``initial_states(n, rng)`` — batch of episode start states
* ``step_all(batch, action_index, rng=None)`` — advance every state in the
  batch by one action of the learning side; returns
  ``(next_batch, rewards, terminal_mask)`` where rewards are evaluated at
  the successor states
* ``is_terminal(batch)`` — boolean mask
* ``raw_features(batch)`` — (n, d) raw feature matrix
* ``n_raw_features`` / ``feature_norms`` — feature dimension and optional
  per-feature normalization constants

Transitions are deterministic; ``rng`` is only consumed by stochastic
opponent policies folded into the environment.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement

import numpy as np

from .geometry import CombatState, Perspective, RewardConfig, features

log = logging.getLogger(__name__)

EXPANSIONS = ("identity", "bias", "linear", "quadratic")


class UnfittedModelError(RuntimeError):
    """Raised when evaluating a model that has no weights yet."""


class SingularFitError(RuntimeError):
    """Raised when the unregularized normal equations are numerically singular."""


@dataclass(frozen=True)
class ValueModel:
    """Feature expansion, normalization and fitted weights of the value estimate.

    ``expansion`` is one of: "identity" (raw features passed through,
    no bias, no normalization — used with one-hot tabular features),
    "bias", "linear", "quadratic".  The polynomial expansions prepend a
    bias term and normalize each raw feature by ``norms`` first.
    """

    expansion: str = "quadratic"
    n_raw: int = 5
    norms: np.ndarray | None = None
    weights: np.ndarray | None = None
    gamma: float = 0.95
    reward_cfg: RewardConfig | None = None

    def __post_init__(self) -> None:
        if self.expansion not in EXPANSIONS:
            raise ValueError(f"unknown expansion {self.expansion!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.weights is not None and len(self.weights) != self.expanded_dim:
            raise ValueError(
                f"weights length {len(self.weights)} != expanded dim {self.expanded_dim}"
            )

    @property
    def expanded_dim(self) -> int:
        n = self.n_raw
        return {
            "identity": n,
            "bias": 1,
            "linear": 1 + n,
            "quadratic": 1 + n + n * (n + 1) // 2,
        }[self.expansion]


@dataclass(frozen=True)
class SampleSet:
    """Ordered training states plus the provenance needed to reproduce them."""

    states: np.ndarray
    seed: int | None = None
    policy: str = "uniform"
    n_episodes: int = 0

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs of the sampling / backup / fit loop."""

    n_samples: int = 100_000
    iterations: int = 40
    gamma: float = 0.95
    epsilon: float = 0.25
    ridge: float = 1e-6
    resample_each_iteration: bool = False
    opponent: str = "constant:continued"
    seed: int = 0
    expansion: str = "quadratic"
    d_scale: float = 3000.0
    terminal_bonus: float = 0.0
    max_episode_steps: int = 200
    # Number of episodes rolled out side by side while sampling; purely a
    # throughput knob, but it changes the random stream, so it is part of
    # the reproducibility contract.
    sample_width: int = 64

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.ridge < 0.0:
            raise ValueError("ridge must be non-negative")
        if self.expansion not in EXPANSIONS:
            raise ValueError(f"unknown expansion {self.expansion!r}")
        if self.sample_width < 1:
            raise ValueError("sample_width must be at least 1")


@dataclass(frozen=True)
class IterationDiagnostics:
    """One row of the training progress stream."""

    iteration: int
    max_abs_delta_v: float
    fit_residual_rms: float
    wall_time_s: float
    n_samples: int
    n_skipped: int = 0


# Fixed monomial order of the quadratic expansion: bias, the 5 normalized
# features, then z_i * z_j for i <= j in lexicographic index order.
def _expand_arrays(raw: np.ndarray, model: ValueModel) -> np.ndarray:
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    if raw.shape[-1] != model.n_raw:
        raise ValueError(f"expected {model.n_raw} raw features, got {raw.shape[-1]}")
    if model.expansion == "identity":
        return raw
    z = raw / model.norms if model.norms is not None else raw
    n = raw.shape[0]
    cols = [np.ones(n)]
    if model.expansion in ("linear", "quadratic"):
        cols.extend(z[:, j] for j in range(model.n_raw))
    if model.expansion == "quadratic":
        cols.extend(
            z[:, i] * z[:, j] for i, j in combinations_with_replacement(range(model.n_raw), 2)
        )
    return np.column_stack(cols)


def expand_features(raw: np.ndarray, model: ValueModel) -> np.ndarray:
    """Expand one raw feature vector into the model's basis."""
    return _expand_arrays(np.asarray(raw, dtype=np.float64).reshape(1, -1), model)[0]


def evaluate_raw(model: ValueModel, raw: np.ndarray) -> np.ndarray:
    """Value estimates for a (n, d) raw feature matrix."""
    if model.weights is None:
        raise UnfittedModelError("value model has no fitted weights")
    return _expand_arrays(raw, model) @ model.weights


def evaluate(model: ValueModel, cs: CombatState, perspective: Perspective) -> float:
    """Approximate long-term value of one combat state."""
    return float(evaluate_raw(model, features(cs, perspective).reshape(1, -1))[0])


def _values(model: ValueModel, env, batch: np.ndarray) -> np.ndarray:
    if model.weights is None:
        return np.zeros(len(batch))
    return evaluate_raw(model, env.raw_features(batch))


def action_values(model: ValueModel, env, batch: np.ndarray, rng=None) -> np.ndarray:
    """(n, n_actions) matrix of one-step look-ahead action values.

    Each entry is the successor reward plus the discounted value estimate,
    with the bootstrap dropped at terminal successors.
    """
    q = np.empty((len(batch), env.n_actions))
    for a in range(env.n_actions):
        nxt, rew, term = env.step_all(batch, a, rng=rng)
        q[:, a] = rew + np.where(term, 0.0, model.gamma * _values(model, env, nxt))
    return q


def bellman_targets(samples: SampleSet, model: ValueModel, env, cfg: TrainingConfig,
                    rng=None) -> np.ndarray:
    """One Bellman backup target per sample: max over actions of r + gamma V.

    Samples whose transition fails are returned as NaN and reported; they
    are never silently dropped here (the fit step excludes and logs them).
    """
    try:
        return action_values(model, env, samples.states, rng=rng).max(axis=1)
    except Exception:
        # Fall back to per-sample evaluation so one bad state cannot poison
        # the whole batch.
        targets = np.full(len(samples), np.nan)
        failures = []
        for i in range(len(samples)):
            row = samples.states[i : i + 1]
            try:
                targets[i] = action_values(model, env, row, rng=rng).max()
            except Exception as exc:  # noqa: BLE001 - reported, not swallowed
                failures.append((i, repr(exc)))
        if failures:
            log.warning(
                "bellman_targets: skipped %d/%d samples; first failure: sample %d: %s",
                len(failures), len(samples), failures[0][0], failures[0][1],
            )
        return targets


def least_squares_fit(samples: SampleSet, targets: np.ndarray, prototype: ValueModel,
                      ridge: float, env) -> ValueModel:
    """Ridge least-squares fit of the value weights via the normal equations."""
    targets = np.asarray(targets, dtype=np.float64)
    if len(targets) != len(samples):
        raise ValueError("targets length does not match sample count")
    phi = _expand_arrays(env.raw_features(samples.states), prototype)
    valid = np.isfinite(targets)
    if not valid.all():
        log.warning("least_squares_fit: excluding %d samples with invalid targets",
                    int((~valid).sum()))
        phi, targets = phi[valid], targets[valid]
    if len(targets) < prototype.expanded_dim:
        raise ValueError(
            f"need at least {prototype.expanded_dim} samples, have {len(targets)}"
        )
    a = phi.T @ phi + ridge * np.eye(phi.shape[1])
    b = phi.T @ targets
    if ridge == 0.0:
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularFitError(
                f"normal equations singular without regularization (cond={cond:.3e})"
            )
    weights = np.linalg.solve(a, b)
    return replace(prototype, weights=weights)


def trajectory_sample(env, model: ValueModel | None, cfg: TrainingConfig, rng) -> SampleSet:
    """Collect exactly ``cfg.n_samples`` states by epsilon-greedy rollouts.

    ``cfg.sample_width`` episodes advance side by side; a finished episode
    (terminal state or step cap) restarts from the initial-state
    distribution on the next sweep, so every visited state, including
    terminal ones, is recorded.  With no model yet the behaviour policy is
    uniform random.
    """
    width = min(cfg.sample_width, cfg.n_samples)
    batch = env.initial_states(width, rng)
    steps = np.zeros(width, dtype=np.int64)
    chunks: list[np.ndarray] = []
    collected = 0
    n_episodes = width
    use_model = model is not None and model.weights is not None
    while collected < cfg.n_samples:
        chunks.append(np.array(batch, copy=True))
        collected += width
        done = np.asarray(env.is_terminal(batch)) | (steps >= cfg.max_episode_steps)
        u = rng.random(width)
        actions = rng.integers(env.n_actions, size=width)
        if use_model and cfg.epsilon < 1.0:
            greedy = np.argmax(action_values(model, env, batch, rng=rng), axis=1)
            actions = np.where(u < cfg.epsilon, actions, greedy)
        nxt = np.array(batch, copy=True)
        live = ~done
        for a in np.unique(actions[live]):
            mask = live & (actions == a)
            nxt[mask], _, _ = env.step_all(batch[mask], int(a), rng=rng)
        steps += 1
        if done.any():
            nxt[done] = env.initial_states(int(done.sum()), rng)
            steps[done] = 0
            n_episodes += int(done.sum())
        batch = nxt
    states = np.concatenate(chunks, axis=0)[: cfg.n_samples]
    policy = "uniform" if model is None else f"epsilon-greedy({cfg.epsilon})"
    return SampleSet(
        states=states, seed=cfg.seed, policy=policy, n_episodes=n_episodes
    )


def make_prototype(cfg: TrainingConfig, env) -> ValueModel:
    """Unfitted model matching the training config and the env's features."""
    return ValueModel(
        expansion=cfg.expansion,
        n_raw=env.n_raw_features,
        norms=env.feature_norms,
        weights=None,
        gamma=cfg.gamma,
        reward_cfg=getattr(env, "reward_cfg", None),
    )


def fit_value_iteration(cfg: TrainingConfig, env, progress=None):
    """Sample, then alternate Bellman backups with ridge least-squares fits.

    Returns ``(model, diagnostics)`` where diagnostics holds one
    ``IterationDiagnostics`` row per iteration; ``progress``, when given,
    is called with each row as it completes.
    """
    rng = np.random.default_rng(cfg.seed)
    prototype = make_prototype(cfg, env)
    if cfg.n_samples <= prototype.expanded_dim:
        raise ValueError(
            f"n_samples={cfg.n_samples} must exceed the expanded feature "
            f"dimension {prototype.expanded_dim}"
        )
    samples = trajectory_sample(env, None, cfg, rng)
    model = replace(prototype, weights=np.zeros(prototype.expanded_dim))
    diagnostics: list[IterationDiagnostics] = []
    for it in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        targets = bellman_targets(samples, model, env, cfg, rng=rng)
        n_skipped = int(np.sum(~np.isfinite(targets)))
        new_model = least_squares_fit(samples, targets, prototype, cfg.ridge, env)
        raw = env.raw_features(samples.states)
        v_new = evaluate_raw(new_model, raw)
        v_old = evaluate_raw(model, raw)
        good = np.isfinite(targets)
        residual = float(np.sqrt(np.mean((v_new[good] - targets[good]) ** 2)))
        diag = IterationDiagnostics(
            iteration=it,
            max_abs_delta_v=float(np.max(np.abs(v_new - v_old))),
            fit_residual_rms=residual,
            wall_time_s=time.perf_counter() - t0,
            n_samples=len(samples),
            n_skipped=n_skipped,
        )
        diagnostics.append(diag)
        if progress is not None:
            progress(diag)
        model = new_model
        notify = getattr(env, "notify_model_update", None)
        if notify is not None:
            notify(model)
        if cfg.resample_each_iteration and it < cfg.iterations:
            samples = trajectory_sample(env, model, cfg, rng)
    return model, diagnostics


def greedy_action(model: ValueModel, state, env, rng=None):
    """Best action label at one state; ties break toward the lowest index."""
    if model.weights is None:
        raise UnfittedModelError("value model has no fitted weights")
    batch = env.pack([state])
    return env.actions[int(np.argmax(action_values(model, env, batch, rng=rng)[0]))]
