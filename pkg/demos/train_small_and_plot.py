"""Train a small maneuvering value model and plot one engagement.

A quick end-to-end pass: fit a reduced-size model against a straight-flying
blue, fly one evaluation episode from the standard engagement start, and
write the trajectory as CSV plus a two-panel SVG (ground track + altitude).

Outputs land in demos/out/.  Run:  python3 demos/train_small_and_plot.py
(takes roughly a minute).
"""

import math
import os

from aircombat_adp import (
    ConstantManeuverPolicy,
    EngagementConfig,
    GreedyValuePolicy,
    InitialStateDistribution,
    TrainingConfig,
    build_training_env,
    evaluate_policies,
    run_episode,
    save_episode_csv,
    save_model,
)
from aircombat_adp.learner import fit_value_iteration
from aircombat_adp.persist import read_episode_csv, write_text_atomic
from aircombat_adp.plotting import render_episode_svg

OUT_DIR = os.path.join(os.path.dirname(__file__), "out")

# Training samples from a widened start distribution so the corpus covers
# all relative headings; evaluation uses the standard engagement start.
TRAIN_DIST = InitialStateDistribution(
    position_sigma=800.0,
    angle_halfwidth=math.radians(10.0),
    psi_halfwidth=math.pi,
)
BONUS = 20.0


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    engagement = EngagementConfig()
    training = TrainingConfig(
        n_samples=8000,
        iterations=10,
        seed=7,
        terminal_bonus=BONUS,
        resample_each_iteration=True,
    )
    env = build_training_env(training, engagement, TRAIN_DIST)

    print("training ...")
    model, diags = fit_value_iteration(
        training, env,
        progress=lambda d: print(
            f"  iteration {d.iteration:2d}  max |dV| = {d.max_abs_delta_v:9.3f}  "
            f"fit rms = {d.fit_residual_rms:7.3f}  ({d.wall_time_s:.1f}s)"
        ),
    )
    save_model(model, os.path.join(OUT_DIR, "model.json"))

    red = GreedyValuePolicy(model, terminal_bonus=BONUS)
    blue = ConstantManeuverPolicy()
    eval_dist = InitialStateDistribution()

    print("\nevaluating 20 episodes ...")
    summary = evaluate_policies(red, blue, eval_dist, engagement, 20, seed=1)
    for outcome, rate in summary.rates.items():
        print(f"  {outcome:9s} {rate:.2f}")
    print(f"  mean steps {summary.mean_steps:.0f}")

    # Pick the first winning episode for the plot (fall back to episode 0).
    record = None
    for ep_seed in summary.episode_seeds:
        record = run_episode(red, blue, eval_dist, engagement, ep_seed)
        if record.outcome.value == "red_win":
            break

    csv_path = os.path.join(OUT_DIR, "episode.csv")
    svg_path = os.path.join(OUT_DIR, "episode.svg")
    save_episode_csv(record, csv_path)
    write_text_atomic(
        svg_path, render_episode_svg(read_episode_csv(csv_path),
                                     outcome=record.outcome.value)
    )
    print(f"\nwrote {csv_path}")
    print(f"wrote {svg_path}  (outcome: {record.outcome.value}, "
          f"{record.rows[-1].step} steps)")


if __name__ == "__main__":
    main()
