"""Command-line interface: train, rollout, eval, plot.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure
(singular unregularized fit).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import engine, persist
from .engine import (
    EvaluationSummary,
    GreedyValuePolicy,
    build_training_env,
    evaluate_policies,
    policy_from_spec,
    run_episode,
)
from .geometry import CombatState, RewardConfig, terminal_status
from .learner import SingularFitError, fit_value_iteration
from .persist import (
    ConfigError,
    CsvFormatError,
    ModelFileError,
    load_model,
    load_run_config,
    read_episode_csv,
    save_episode_csv,
    save_model,
    write_text_atomic,
)
from .plotting import render_episode_svg

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _fail(message: str, code: int = EXIT_CONFIG) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _apply_train_overrides(cfg: persist.RunConfig, args) -> persist.RunConfig:
    import dataclasses

    training = cfg.training
    updates = {}
    if args.samples is not None:
        updates["n_samples"] = args.samples
    if args.iterations is not None:
        updates["iterations"] = args.iterations
    if args.gamma is not None:
        updates["gamma"] = args.gamma
    if args.epsilon is not None:
        updates["epsilon"] = args.epsilon
    if args.ridge is not None:
        updates["ridge"] = args.ridge
    if args.opponent is not None:
        updates["opponent"] = args.opponent
    if args.resample:
        updates["resample_each_iteration"] = True
    seed = cfg.seed if args.seed is None else args.seed
    updates["seed"] = seed
    try:
        training = dataclasses.replace(training, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return dataclasses.replace(cfg, training=training, seed=seed)


def cmd_train(args) -> int:
    try:
        cfg = load_run_config(args.config)
        cfg = _apply_train_overrides(cfg, args)
        if cfg.training.opponent != "self":
            policy_from_spec(cfg.training.opponent)  # validate the descriptor
    except (ConfigError, ValueError) as exc:
        return _fail(str(exc))
    env = build_training_env(cfg.training, cfg.engagement, cfg.init)

    def progress(diag):
        print(
            f"iteration={diag.iteration} max_dv={diag.max_abs_delta_v:.6g} "
            f"residual_rms={diag.fit_residual_rms:.6g} "
            f"wall_s={diag.wall_time_s:.2f} samples={diag.n_samples} "
            f"skipped={diag.n_skipped}",
            flush=True,
        )

    try:
        model, _ = fit_value_iteration(cfg.training, env, progress=progress)
    except SingularFitError as exc:
        return _fail(f"numerical failure: {exc}", EXIT_NUMERICAL)
    except ValueError as exc:
        return _fail(str(exc))
    try:
        save_model(model, args.out)
    except OSError as exc:
        return _fail(f"cannot write model to {args.out}: {exc}")
    print(f"model written to {args.out}")
    return EXIT_OK


def _summary_dict(s: EvaluationSummary) -> dict:
    return {
        "n_episodes": s.n_episodes,
        "counts": s.counts,
        "rates": s.rates,
        "mean_steps": s.mean_steps,
        "mean_terminal_reward_red": s.mean_terminal_reward_red,
        "mean_terminal_reward_blue": s.mean_terminal_reward_blue,
        "seed": s.seed,
    }


def cmd_rollout(args) -> int:
    try:
        model = load_model(args.model)
        cfg = load_run_config(args.config)
        blue = policy_from_spec(args.opponent, model=model)
    except (ModelFileError, ConfigError, ValueError) as exc:
        return _fail(str(exc))
    if model.weights is None:
        return _fail("model file has no fitted weights")
    red = GreedyValuePolicy(model)
    seed = cfg.seed if args.seed is None else args.seed
    os.makedirs(args.out, exist_ok=True)
    seeds = engine.episode_seeds(seed, args.episodes)
    episodes = []
    for i, ep_seed in enumerate(seeds):
        record = run_episode(red, blue, cfg.init, cfg.engagement, ep_seed)
        name = f"episode_{i:03d}.csv"
        save_episode_csv(record, os.path.join(args.out, name))
        episodes.append(
            {
                "file": name,
                "outcome": record.outcome.value,
                "steps": record.rows[-1].step,
                "seed": ep_seed,
            }
        )
    counts: dict[str, int] = {}
    for ep in episodes:
        counts[ep["outcome"]] = counts.get(ep["outcome"], 0) + 1
    summary = {"seed": seed, "opponent": args.opponent, "counts": counts,
               "episodes": episodes}
    write_text_atomic(
        os.path.join(args.out, "summary.json"), json.dumps(summary, indent=2) + "\n"
    )
    print(f"wrote {len(episodes)} episode files and summary.json to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = load_model(args.model)
        cfg = load_run_config(args.config)
        blue = policy_from_spec(args.opponent, model=model)
    except (ModelFileError, ConfigError, ValueError) as exc:
        return _fail(str(exc))
    if model.weights is None:
        return _fail("model file has no fitted weights")
    seed = cfg.seed if args.seed is None else args.seed
    trained = evaluate_policies(
        GreedyValuePolicy(model), blue, cfg.init, cfg.engagement, args.episodes, seed
    )
    out = {"trained": _summary_dict(trained)}
    if args.baseline is not None:
        try:
            baseline_red = policy_from_spec(args.baseline, model=model)
        except ValueError as exc:
            return _fail(str(exc))
        baseline = evaluate_policies(
            baseline_red, blue, cfg.init, cfg.engagement, args.episodes, seed
        )
        out["baseline"] = _summary_dict(baseline)
        out["paired_diff"] = {
            "red_win_rate": trained.rates["red_win"] - baseline.rates["red_win"],
            "mean_terminal_reward_red": trained.mean_terminal_reward_red
            - baseline.mean_terminal_reward_red,
        }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        rows = read_episode_csv(args.csv)
    except FileNotFoundError:
        return _fail(f"trajectory CSV not found: {args.csv}")
    except CsvFormatError as exc:
        return _fail(f"malformed CSV {args.csv}: {exc}")
    last = rows[-1]
    # Recompute the outcome from the final recorded state (default reward
    # bounds; the CSV schema does not carry the config).
    from .dynamics import AircraftState

    final = CombatState(
        red=AircraftState(last["v_r"], last["x_r"], last["y_r"], last["z_r"],
                          last["theta_r"], last["psi_r"], last["bank_r"]),
        blue=AircraftState(last["v_b"], last["x_b"], last["y_b"], last["z_b"],
                           last["theta_b"], last["psi_b"], last["bank_b"]),
        step=last["step"],
    )
    outcome = terminal_status(final, last["step"], RewardConfig()).value
    write_text_atomic(args.out, render_episode_svg(rows, outcome=outcome))
    print(f"plot written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircombat",
        description="One-on-one air-combat simulator and maneuvering-policy trainer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a maneuvering value model")
    p_train.add_argument("--config", default=None, help="TOML run configuration")
    p_train.add_argument("--out", default="model.json", help="model output path")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--samples", type=int, default=None)
    p_train.add_argument("--iterations", type=int, default=None)
    p_train.add_argument("--gamma", type=float, default=None)
    p_train.add_argument("--epsilon", type=float, default=None)
    p_train.add_argument("--ridge", type=float, default=None)
    p_train.add_argument("--opponent", default=None,
                         help="constant:<maneuver> | random | self")
    p_train.add_argument("--resample", action="store_true",
                         help="redraw the sample set every iteration")
    p_train.set_defaults(func=cmd_train)

    p_roll = sub.add_parser("rollout", help="fly recorded episodes with a model")
    p_roll.add_argument("--model", required=True)
    p_roll.add_argument("--opponent", default="constant:continued")
    p_roll.add_argument("--episodes", type=int, default=1)
    p_roll.add_argument("--out", default="rollouts", help="output directory")
    p_roll.add_argument("--config", default=None)
    p_roll.add_argument("--seed", type=int, default=None)
    p_roll.set_defaults(func=cmd_rollout)

    p_eval = sub.add_parser("eval", help="aggregate outcome statistics")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--opponent", default="constant:continued")
    p_eval.add_argument("--baseline", default=None,
                        help="red baseline policy for a paired-seed comparison")
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_plot = sub.add_parser("plot", help="render a trajectory CSV to SVG")
    p_plot.add_argument("csv", help="episode CSV produced by rollout")
    p_plot.add_argument("--out", default="episode.svg", help="SVG output path")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
