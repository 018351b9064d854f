"""End-to-end acceptance checks.

Each test prints one [PASS]/[FAIL] line (visible with ``pytest -s`` or on
failure) and asserts the same condition:

1. energy invariant of the point-mass dynamics under zero tangential overload
2. single-step integrator accuracy against a 1e-5 s sub-step reference
3. rigid-motion invariance and perspective complementarity of the geometry
4. shaped-reward bounds and the range peak
5. learner equivalence with exact tabular value iteration
6. greedy-policy invariance to a constant value shift
7. desk-scale training outcome against a straight-flying opponent
8. self-play episode sanity
9. reproducibility: identical win counts and byte-identical model files

The expensive artifacts (the trained model, its evaluations) are built once
in session fixtures and shared, including by the reproducibility check.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from test_learner import TabularMDP, exact_greedy, exact_value_iteration

from aircombat_adp import (
    CombatEnvironment,
    ConstantManeuverPolicy,
    DynamicsConfig,
    EngagementConfig,
    GreedyValuePolicy,
    InitialStateDistribution,
    Outcome,
    Perspective,
    RewardConfig,
    TrainingConfig,
    UniformRandomPolicy,
    ValueModel,
    build_training_env,
    evaluate_policies,
    fit_value_iteration,
    greedy_action,
    run_episode,
    save_model,
    specific_energy,
)
from aircombat_adp.dynamics import MANEUVERS, TH, V, Z, maneuver_controls, rk4_step_arrays
from aircombat_adp.geometry import geometry_arrays, reward_arrays
from aircombat_adp.learner import evaluate_raw

DCFG = DynamicsConfig()
RCFG = RewardConfig()


def report(criterion: int, description: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {description}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    if sys.stdout is not sys.__stdout__:  # also emit past pytest's capture
        print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def random_single_states(n, rng, v_lo=70.0, v_hi=380.0, theta_lim=1.2):
    arr = np.empty((n, 7))
    arr[:, V] = rng.uniform(v_lo, v_hi, n)
    arr[:, 1:3] = rng.uniform(-5000, 5000, (n, 2))
    arr[:, Z] = rng.uniform(500, 10000, n)
    arr[:, TH] = rng.uniform(-theta_lim, theta_lim, n)
    arr[:, 5] = rng.uniform(-math.pi, math.pi, n)
    arr[:, 6] = 0.0
    return arr


def random_combat_arrays(n, rng, spread=5000.0):
    arr = np.empty((n, 15))
    arr[:, 0:7] = random_single_states(n, rng)
    arr[:, 7:14] = random_single_states(n, rng)
    arr[:, 1:3] = rng.uniform(-spread, spread, (n, 2))
    arr[:, 8:10] = rng.uniform(-spread, spread, (n, 2))
    arr[:, 14] = 0.0
    return arr


# ---------------------------------------------------------------------------
# Desk-scale training recipe (criterion 7) shared by criteria 7-9.
# ---------------------------------------------------------------------------

TRAIN_SEED = 11
EVAL_SEED = 5
N_EVAL_EPISODES = 100
TERMINAL_BONUS = 20.0

ENGAGEMENT = EngagementConfig()
EVAL_DIST = InitialStateDistribution()
TRAIN_DIST = InitialStateDistribution(
    position_sigma=800.0,
    angle_halfwidth=math.radians(10.0),
    psi_halfwidth=math.pi,
)
TRAIN_CFG = TrainingConfig(
    n_samples=20_000,
    iterations=15,
    seed=TRAIN_SEED,
    terminal_bonus=TERMINAL_BONUS,
    resample_each_iteration=True,
)


def train_experiment_model():
    env = build_training_env(TRAIN_CFG, ENGAGEMENT, TRAIN_DIST)
    model, _ = fit_value_iteration(TRAIN_CFG, env)
    return model


def evaluate_red(red_policy):
    return evaluate_policies(
        red_policy, ConstantManeuverPolicy(), EVAL_DIST, ENGAGEMENT,
        N_EVAL_EPISODES, seed=EVAL_SEED,
    )


@pytest.fixture(scope="session")
def experiment1(tmp_path_factory):
    t0 = time.perf_counter()
    model = train_experiment_model()
    trained = evaluate_red(GreedyValuePolicy(model, terminal_bonus=TERMINAL_BONUS))
    baseline = evaluate_red(UniformRandomPolicy())
    wall = time.perf_counter() - t0
    path = tmp_path_factory.mktemp("acceptance") / "model.json"
    save_model(model, str(path))
    return {
        "model": model,
        "model_path": str(path),
        "trained": trained,
        "baseline": baseline,
        "wall_s": wall,
    }


@pytest.fixture(scope="session")
def selfplay(experiment1):
    model = experiment1["model"]
    policy = GreedyValuePolicy(model, terminal_bonus=TERMINAL_BONUS)
    summary = evaluate_policies(
        policy, GreedyValuePolicy(model), EVAL_DIST, ENGAGEMENT,
        N_EVAL_EPISODES, seed=EVAL_SEED,
    )
    return {"policy": policy, "summary": summary}


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def test_criterion_1_energy_invariant():
    rng = np.random.default_rng(101)
    states = random_single_states(10_000, rng)
    e0 = specific_energy(states[:, V], states[:, Z], DCFG.g)
    no_nx = [m for m in MANEUVERS if maneuver_controls(m).nx == 0.0]
    assert len(no_nx) == 6
    worst = 0.0
    t0 = time.perf_counter()
    for m in no_nx:
        u = maneuver_controls(m)
        out = rk4_step_arrays(
            states, np.full(1, u.nx), np.full(1, u.nz), np.full(1, u.bank), DCFG
        )
        clamped = (
            (out[:, V] <= DCFG.v_min) | (out[:, V] >= DCFG.v_max)
            | (np.abs(out[:, TH]) >= DCFG.theta_max)
        )
        e1 = specific_energy(out[:, V], out[:, Z], DCFG.g)
        rel = np.abs(e1 - e0) / e0
        assert clamped.sum() < len(states) // 100
        worst = max(worst, float(rel[~clamped].max()))
    elapsed = time.perf_counter() - t0
    report(
        1, "specific energy conserved by all six zero-thrust maneuvers",
        worst < 1e-6 and elapsed < 1.0,
        f"worst rel err {worst:.2e}, {elapsed:.2f}s",
    )


def _reference_substep_integration(state, u, dt, h=1e-5, g=9.81):
    """Independent scalar RK4 at fixed sub-step h; no state guards."""

    def deriv(y):
        v, x, yy, z, th, ps = y
        return np.array([
            g * (u.nx - math.sin(th)),
            v * math.cos(th) * math.sin(ps),
            v * math.cos(th) * math.cos(ps),
            v * math.sin(th),
            (u.nz * math.cos(u.bank) - math.cos(th)) * g / v,
            g * u.nz * math.sin(u.bank) / (v * math.cos(th)),
        ])

    y = np.array(state, dtype=float)
    n = round(dt / h)
    for _ in range(n):
        k1 = deriv(y)
        k2 = deriv(y + 0.5 * h * k1)
        k3 = deriv(y + 0.5 * h * k2)
        k4 = deriv(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_criterion_2_integrator_accuracy():
    start = np.array([250.0, 0.0, 0.0, 2900.0, 0.0, math.radians(45.0), 0.0])
    worst_pos, worst_ang = 0.0, 0.0
    for m in MANEUVERS:
        u = maneuver_controls(m)
        out = rk4_step_arrays(
            start[None, :], np.full(1, u.nx), np.full(1, u.nz), np.full(1, u.bank),
            DCFG,
        )[0]
        ref = _reference_substep_integration(start[:6], u, DCFG.dt, g=DCFG.g)
        worst_pos = max(worst_pos, float(np.abs(out[1:4] - ref[1:4]).max()))
        worst_ang = max(worst_ang, float(np.abs(out[[4, 5]] - ref[[4, 5]]).max()))
    report(
        2, "one decision step matches the 1e-5 s sub-step reference",
        worst_pos < 1e-4 and worst_ang < 1e-7,
        f"worst position err {worst_pos:.2e} m, angle err {worst_ang:.2e} rad",
    )


def test_criterion_3_geometry_invariance():
    rng = np.random.default_rng(303)
    arr = random_combat_arrays(25, rng)
    base = {p: geometry_arrays(arr, p) for p in Perspective}
    worst = 0.0
    for _ in range(1000):
        alpha = rng.uniform(-math.pi, math.pi)
        shift = rng.uniform(-20000, 20000, size=3)
        rot = np.array([[math.cos(alpha), math.sin(alpha)],
                        [-math.sin(alpha), math.cos(alpha)]])
        moved = arr.copy()
        for off in (0, 7):
            moved[:, off + 1 : off + 3] = moved[:, off + 1 : off + 3] @ rot.T
            moved[:, off + 1 : off + 4] += shift
            moved[:, off + 5] += alpha
        for p in Perspective:
            aa, ata, r, _, _ = geometry_arrays(moved, p)
            aa0, ata0, r0, _, _ = base[p]
            worst = max(
                worst,
                float(np.abs(aa - aa0).max()),
                float(np.abs(ata - ata0).max()),
                float(np.abs(r / r0 - 1.0).max()),
            )
    big = random_combat_arrays(2000, rng)
    aa_r, ata_r, *_ = geometry_arrays(big, Perspective.RED)
    aa_b, ata_b, *_ = geometry_arrays(big, Perspective.BLUE)
    comp = max(
        float(np.abs(ata_r + aa_b - math.pi).max()),
        float(np.abs(ata_b + aa_r - math.pi).max()),
    )
    report(
        3, "geometry invariant under rigid motion; perspectives are complements",
        worst < 1e-9 and comp < 1e-9,
        f"worst invariance err {worst:.2e}, complement err {comp:.2e}",
    )


def test_criterion_4_reward_bounds_and_peak():
    rng = np.random.default_rng(404)
    arr = random_combat_arrays(100_000, rng)
    ok = True
    for p in Perspective:
        aa, ata, r, dv, dh = geometry_arrays(arr, p)
        r3 = ((1 - aa / math.pi) + (1 - ata / math.pi)) / 2 * np.exp(
            -np.abs(r - RCFG.r_d) / (RCFG.k * math.pi)
        )
        total = reward_arrays(arr, p, RCFG)
        ok &= bool(np.all((r3 >= 0.0) & (r3 <= 1.0)))
        ok &= bool(np.all((total >= -2.0 / 3.0 - 1e-12) & (total <= 1.0 + 1e-12)))
    # Range sweep at fixed angles: the distance term must peak at r_d.
    ranges = np.concatenate([np.linspace(50, 8000, 400), [RCFG.r_d]])
    sweep = np.zeros((len(ranges), 15))
    sweep[:, V] = 250.0
    sweep[:, 7 + V] = 204.0
    sweep[:, 3] = sweep[:, 10] = 3000.0  # co-altitude
    sweep[:, 9] = ranges  # blue directly north of red, both heading north
    r3_sweep = reward_arrays(sweep, Perspective.RED, RewardConfig(weights=(0, 0, 1)))
    peak_ok = bool(np.argmax(r3_sweep) == len(ranges) - 1)
    report(
        4, "reward components bounded and range-peaked at r_d",
        ok and peak_ok,
        f"peak at range {ranges[np.argmax(r3_sweep)]:.0f} m",
    )


def _tabular_fit_config(env, seed):
    return TrainingConfig(
        n_samples=40 * env.n_states, iterations=180, gamma=0.9, ridge=0.0,
        expansion="identity", max_episode_steps=10, seed=seed,
    )


def test_criterion_5_tabular_oracle_equivalence():
    rng = np.random.default_rng(505)
    worst = 0.0
    mismatches = 0
    t0 = time.perf_counter()
    for _ in range(20):
        n_states = int(rng.integers(2, 21))
        n_actions = int(rng.integers(2, 6))
        env = TabularMDP.random(rng, n_states, n_actions)
        v_star = exact_value_iteration(env, gamma=0.9)
        a_star = exact_greedy(env, v_star, gamma=0.9)
        model, _ = fit_value_iteration(
            _tabular_fit_config(env, seed=int(rng.integers(1 << 31))), env
        )
        v_fit = evaluate_raw(model, np.eye(n_states))
        worst = max(worst, float(np.abs(v_fit - v_star).max()))
        q_star = env.reward + 0.9 * np.where(
            env.terminal[env.next_state], 0.0, v_star[env.next_state]
        )
        sorted_q = np.sort(q_star, axis=1)
        for s in np.flatnonzero(sorted_q[:, -1] - sorted_q[:, -2] > 1e-9):
            if greedy_action(model, int(s), env) != a_star[s]:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    report(
        5, "fitted iteration matches exact tabular value iteration on 20 MDPs",
        worst < 1e-6 and mismatches == 0 and elapsed < 10.0,
        f"worst value err {worst:.2e}, {mismatches} greedy mismatches, "
        f"{elapsed:.1f}s",
    )


def test_criterion_6_greedy_shift_invariance():
    env = CombatEnvironment(engagement=ENGAGEMENT, init_dist=EVAL_DIST)
    rng = np.random.default_rng(606)
    proto = ValueModel(expansion="quadratic", n_raw=5, norms=env.feature_norms)
    model = replace(proto, weights=rng.normal(size=proto.expanded_dim))
    shifted = replace(
        model, weights=model.weights + 1e4 * np.eye(proto.expanded_dim)[0]
    )
    arr = env.initial_states(1000, rng)
    base = GreedyValuePolicy(model).choose_batch(arr, Perspective.RED, ENGAGEMENT, None)
    moved = GreedyValuePolicy(shifted).choose_batch(
        arr, Perspective.RED, ENGAGEMENT, None
    )
    changed = int(np.sum(base != moved))
    report(
        6, "constant shift of the value bias changes no greedy action",
        changed == 0, f"{changed}/1000 actions changed",
    )


def test_criterion_7_training_beats_baselines(experiment1):
    trained = experiment1["trained"]
    baseline = experiment1["baseline"]
    win = trained.rates["red_win"]
    ok = (
        win >= 0.6
        and win > baseline.rates["red_win"]
        and trained.mean_terminal_reward_red > baseline.mean_terminal_reward_red
        and experiment1["wall_s"] <= 15 * 60
    )
    report(
        7, "desk-scale training wins >= 60% and beats the random baseline",
        ok,
        f"RedWin {win:.2f} vs random {baseline.rates['red_win']:.2f}, "
        f"terminal reward {trained.mean_terminal_reward_red:.3f} vs "
        f"{baseline.mean_terminal_reward_red:.3f}, wall {experiment1['wall_s']:.0f}s",
    )


def test_criterion_8_selfplay_sanity(selfplay):
    summary = selfplay["summary"]
    policy = selfplay["policy"]
    # Spot-check full records for validity on a subset of the same seeds.
    valid = True
    for ep_seed in summary.episode_seeds[:10]:
        rec = run_episode(
            policy, GreedyValuePolicy(policy.model), EVAL_DIST, ENGAGEMENT, ep_seed
        )
        valid &= rec.outcome is not Outcome.ONGOING
        valid &= rec.rows[-1].step <= ENGAGEMENT.max_steps
        valid &= all(
            np.isfinite([r.red.v, r.red.z, r.blue.v, r.blue.z, r.reward_red])
            .all()
            for r in rec.rows
        )
        valid &= [r.step for r in rec.rows] == list(range(len(rec.rows)))
    ok = sum(summary.counts.values()) == N_EVAL_EPISODES and valid
    report(
        8, "100 self-play episodes all terminate with valid records",
        ok,
        f"rates {summary.rates}, mean steps {summary.mean_steps:.0f}",
    )


def test_criterion_9_reproducibility(experiment1, selfplay, tmp_path):
    model2 = train_experiment_model()
    path2 = tmp_path / "model2.json"
    save_model(model2, str(path2))
    with open(experiment1["model_path"], "rb") as fh:
        bytes1 = fh.read()
    identical_files = bytes1 == path2.read_bytes()

    trained2 = evaluate_red(GreedyValuePolicy(model2, terminal_bonus=TERMINAL_BONUS))
    selfplay2 = evaluate_policies(
        GreedyValuePolicy(model2, terminal_bonus=TERMINAL_BONUS),
        GreedyValuePolicy(model2), EVAL_DIST, ENGAGEMENT,
        N_EVAL_EPISODES, seed=EVAL_SEED,
    )
    same_counts = (
        trained2.counts == experiment1["trained"].counts
        and selfplay2.counts == selfplay["summary"].counts
    )

    rng = np.random.default_rng(909)
    env_a = TabularMDP.random(rng, 12, 4)
    env_b = TabularMDP(env_a.next_state, env_a.reward)
    m_a, _ = fit_value_iteration(_tabular_fit_config(env_a, seed=3), env_a)
    m_b, _ = fit_value_iteration(_tabular_fit_config(env_b, seed=3), env_b)
    same_tabular = bool(np.array_equal(m_a.weights, m_b.weights))

    report(
        9, "reruns give identical win counts and byte-identical model files",
        identical_files and same_counts and same_tabular,
        f"files identical={identical_files}, counts identical={same_counts}, "
        f"tabular weights identical={same_tabular}",
    )
