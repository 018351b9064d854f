"""Configuration files, model persistence, and the trajectory CSV schema.

The run configuration is sectioned TOML; unknown sections or keys are
rejected so a typo cannot silently fall back to a default.  Models are
JSON with a format_version and full-precision (shortest round-trip)
floats, so a saved and reloaded model evaluates bit-identically.  All
writes are whole-file atomic (write to a sibling temp file, then rename).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .dynamics import DynamicsConfig, Maneuver
from .engine import (
    CraftInit,
    EngagementConfig,
    EpisodeRecord,
    InitialStateDistribution,
)
from .geometry import RewardConfig
from .learner import TrainingConfig, ValueModel

MODEL_FORMAT_VERSION = 1

# Trajectory CSV columns, fixed order; angles in radians, header mandatory.
CSV_COLUMNS = (
    "step", "t_s",
    "v_r", "x_r", "y_r", "z_r", "theta_r", "psi_r", "bank_r", "maneuver_r",
    "v_b", "x_b", "y_b", "z_b", "theta_b", "psi_b", "bank_b", "maneuver_b",
    "aa_red", "ata_red", "range_m", "reward_red", "reward_blue",
)


class ConfigError(ValueError):
    """Invalid, unknown or out-of-range configuration input."""


class ModelFileError(ValueError):
    """Unreadable or version-incompatible model file."""


class CsvFormatError(ValueError):
    """Malformed trajectory CSV; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run, grouped by subsystem."""

    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    init: InitialStateDistribution = field(default_factory=InitialStateDistribution)
    seed: int = 0
    max_steps: int = 200

    @property
    def engagement(self) -> EngagementConfig:
        return EngagementConfig(
            dynamics=self.dynamics, reward=self.reward, max_steps=self.max_steps
        )


def write_text_atomic(path: str, text: str) -> None:
    """Write a whole file atomically (temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Run configuration (TOML)
# ---------------------------------------------------------------------------

_SECTION_KEYS = {
    "dynamics": (
        "g", "dt", "v_min", "v_max", "theta_max_deg", "deceleration_nx",
    ),
    "reward": (
        "r_d", "k", "v_scale", "h_scale", "ata_max", "aa_max", "weights", "max_range",
    ),
    "training": (
        "samples", "iterations", "gamma", "epsilon", "ridge", "resample",
        "opponent", "expansion", "d_scale", "terminal_bonus", "max_episode_steps",
        "sample_width",
    ),
    "init": (
        "red_v", "red_x", "red_y", "red_z", "red_theta_deg", "red_psi_deg",
        "blue_v", "blue_x", "blue_y", "blue_z", "blue_theta_deg", "blue_psi_deg",
        "position_sigma", "angle_halfwidth_deg", "psi_halfwidth_deg",
    ),
    "run": ("seed", "max_steps"),
}


def _check_sections(data: dict) -> None:
    for section, content in data.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in content:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def _craft_init(sec: dict, side: str, default: CraftInit) -> CraftInit:
    return CraftInit(
        v=float(sec.get(f"{side}_v", default.v)),
        x=float(sec.get(f"{side}_x", default.x)),
        y=float(sec.get(f"{side}_y", default.y)),
        z=float(sec.get(f"{side}_z", default.z)),
        theta=math.radians(sec[f"{side}_theta_deg"])
        if f"{side}_theta_deg" in sec else default.theta,
        psi=math.radians(sec[f"{side}_psi_deg"])
        if f"{side}_psi_deg" in sec else default.psi,
    )


def run_config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from parsed TOML data."""
    _check_sections(data)
    defaults = RunConfig()
    try:
        dyn_sec = data.get("dynamics", {})
        dynamics = DynamicsConfig(
            g=float(dyn_sec.get("g", defaults.dynamics.g)),
            dt=float(dyn_sec.get("dt", defaults.dynamics.dt)),
            v_min=float(dyn_sec.get("v_min", defaults.dynamics.v_min)),
            v_max=float(dyn_sec.get("v_max", defaults.dynamics.v_max)),
            theta_max=math.radians(dyn_sec["theta_max_deg"])
            if "theta_max_deg" in dyn_sec else defaults.dynamics.theta_max,
            deceleration_nx=float(
                dyn_sec.get("deceleration_nx", defaults.dynamics.deceleration_nx)
            ),
        )
        rew_sec = data.get("reward", {})
        weights = rew_sec.get("weights", list(defaults.reward.weights))
        if len(weights) != 3:
            raise ConfigError("reward.weights must have exactly 3 entries")
        reward = RewardConfig(
            r_d=float(rew_sec.get("r_d", defaults.reward.r_d)),
            k=float(rew_sec.get("k", defaults.reward.k)),
            v_scale=float(rew_sec.get("v_scale", defaults.reward.v_scale)),
            h_scale=float(rew_sec.get("h_scale", defaults.reward.h_scale)),
            ata_max=float(rew_sec.get("ata_max", defaults.reward.ata_max)),
            aa_max=float(rew_sec.get("aa_max", defaults.reward.aa_max)),
            weights=tuple(float(w) for w in weights),
            max_range=float(rew_sec["max_range"]) if "max_range" in rew_sec else None,
        )
        run_sec = data.get("run", {})
        seed = int(run_sec.get("seed", defaults.seed))
        tr_sec = data.get("training", {})
        training = TrainingConfig(
            n_samples=int(tr_sec.get("samples", defaults.training.n_samples)),
            iterations=int(tr_sec.get("iterations", defaults.training.iterations)),
            gamma=float(tr_sec.get("gamma", defaults.training.gamma)),
            epsilon=float(tr_sec.get("epsilon", defaults.training.epsilon)),
            ridge=float(tr_sec.get("ridge", defaults.training.ridge)),
            resample_each_iteration=bool(
                tr_sec.get("resample", defaults.training.resample_each_iteration)
            ),
            opponent=str(tr_sec.get("opponent", defaults.training.opponent)),
            seed=seed,
            expansion=str(tr_sec.get("expansion", defaults.training.expansion)),
            d_scale=float(tr_sec.get("d_scale", defaults.training.d_scale)),
            terminal_bonus=float(
                tr_sec.get("terminal_bonus", defaults.training.terminal_bonus)
            ),
            max_episode_steps=int(
                tr_sec.get("max_episode_steps", defaults.training.max_episode_steps)
            ),
            sample_width=int(
                tr_sec.get("sample_width", defaults.training.sample_width)
            ),
        )
        init_sec = data.get("init", {})
        init = InitialStateDistribution(
            red=_craft_init(init_sec, "red", defaults.init.red),
            blue=_craft_init(init_sec, "blue", defaults.init.blue),
            position_sigma=float(
                init_sec.get("position_sigma", defaults.init.position_sigma)
            ),
            angle_halfwidth=math.radians(init_sec["angle_halfwidth_deg"])
            if "angle_halfwidth_deg" in init_sec else defaults.init.angle_halfwidth,
            psi_halfwidth=math.radians(init_sec["psi_halfwidth_deg"])
            if "psi_halfwidth_deg" in init_sec else defaults.init.psi_halfwidth,
        )
        max_steps = int(run_sec.get("max_steps", defaults.max_steps))
        if max_steps < 1:
            raise ConfigError("run.max_steps must be at least 1")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        dynamics=dynamics, reward=reward, training=training, init=init,
        seed=seed, max_steps=max_steps,
    )


def load_run_config(path: str | None) -> RunConfig:
    """Load a TOML run config; with no path, every key takes its default."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return run_config_from_dict(data)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(v)


def dump_run_config(cfg: RunConfig) -> str:
    """Effective configuration as TOML; reloading it reproduces the RunConfig."""
    d, r, t, i = cfg.dynamics, cfg.reward, cfg.training, cfg.init
    sections: dict[str, dict] = {
        "dynamics": {
            "g": d.g, "dt": d.dt, "v_min": d.v_min, "v_max": d.v_max,
            "theta_max_deg": math.degrees(d.theta_max),
            "deceleration_nx": d.deceleration_nx,
        },
        "reward": {
            "r_d": r.r_d, "k": r.k, "v_scale": r.v_scale, "h_scale": r.h_scale,
            "ata_max": r.ata_max, "aa_max": r.aa_max, "weights": list(r.weights),
            **({"max_range": r.max_range} if r.max_range is not None else {}),
        },
        "training": {
            "samples": t.n_samples, "iterations": t.iterations, "gamma": t.gamma,
            "epsilon": t.epsilon, "ridge": t.ridge,
            "resample": t.resample_each_iteration, "opponent": t.opponent,
            "expansion": t.expansion, "d_scale": t.d_scale,
            "terminal_bonus": t.terminal_bonus,
            "max_episode_steps": t.max_episode_steps,
            "sample_width": t.sample_width,
        },
        "init": {
            "red_v": i.red.v, "red_x": i.red.x, "red_y": i.red.y, "red_z": i.red.z,
            "red_theta_deg": math.degrees(i.red.theta),
            "red_psi_deg": math.degrees(i.red.psi),
            "blue_v": i.blue.v, "blue_x": i.blue.x, "blue_y": i.blue.y,
            "blue_z": i.blue.z,
            "blue_theta_deg": math.degrees(i.blue.theta),
            "blue_psi_deg": math.degrees(i.blue.psi),
            "position_sigma": i.position_sigma,
            "angle_halfwidth_deg": math.degrees(i.angle_halfwidth),
            **(
                {"psi_halfwidth_deg": math.degrees(i.psi_halfwidth)}
                if i.psi_halfwidth is not None else {}
            ),
        },
        "run": {"seed": cfg.seed, "max_steps": cfg.max_steps},
    }
    lines = []
    for name, keys in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in keys.items())
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Model files (JSON)
# ---------------------------------------------------------------------------


def model_to_dict(model: ValueModel) -> dict:
    reward = dataclasses.asdict(model.reward_cfg) if model.reward_cfg else None
    if reward is not None:
        reward["weights"] = list(reward["weights"])
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "value-model",
        "meta": {"package": "aircombat-adp"},
        "expansion": model.expansion,
        "n_raw": model.n_raw,
        "norms": None if model.norms is None else [float(x) for x in model.norms],
        "gamma": model.gamma,
        "reward": reward,
        "weights": None if model.weights is None else [float(w) for w in model.weights],
    }


def save_model(model: ValueModel, path: str) -> None:
    write_text_atomic(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str) -> ValueModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ModelFileError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("kind") != "value-model":
        raise ModelFileError(f"{path} is not a value-model file")
    version = data.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"unsupported model format_version {version!r}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    reward = data.get("reward")
    reward_cfg = None
    if reward is not None:
        reward = dict(reward)
        reward["weights"] = tuple(reward.get("weights", (1 / 3, 1 / 3, 1 / 3)))
        reward_cfg = RewardConfig(**reward)
    try:
        return ValueModel(
            expansion=data["expansion"],
            n_raw=int(data["n_raw"]),
            norms=None if data["norms"] is None else np.array(data["norms"]),
            weights=None if data["weights"] is None else np.array(data["weights"]),
            gamma=float(data["gamma"]),
            reward_cfg=reward_cfg,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Trajectory CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def episode_to_csv(record: EpisodeRecord) -> str:
    """Render an episode as CSV text following the fixed column schema."""
    lines = [",".join(CSV_COLUMNS)]
    for row in record.rows:
        r, b = row.red, row.blue
        cells = [
            str(row.step), _fmt(row.t),
            _fmt(r.v), _fmt(r.x), _fmt(r.y), _fmt(r.z),
            _fmt(r.theta), _fmt(r.psi), _fmt(r.bank),
            row.maneuver_red.name.lower() if row.maneuver_red else "",
            _fmt(b.v), _fmt(b.x), _fmt(b.y), _fmt(b.z),
            _fmt(b.theta), _fmt(b.psi), _fmt(b.bank),
            row.maneuver_blue.name.lower() if row.maneuver_blue else "",
            _fmt(row.geom_red.aa), _fmt(row.geom_red.ata), _fmt(row.geom_red.range),
            _fmt(row.reward_red), _fmt(row.reward_blue),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_episode_csv(record: EpisodeRecord, path: str) -> None:
    write_text_atomic(path, episode_to_csv(record))


_FLOAT_COLUMNS = tuple(
    c for c in CSV_COLUMNS if c not in ("step", "maneuver_r", "maneuver_b")
)


def read_episode_csv(path: str) -> list[dict]:
    """Parse a trajectory CSV back into row dicts, validating the schema."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError("empty file", 1)
    header = tuple(lines[0].split(","))
    if header != CSV_COLUMNS:
        raise CsvFormatError(
            f"header mismatch: expected {','.join(CSV_COLUMNS)}", 1
        )
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise CsvFormatError(
                f"expected {len(CSV_COLUMNS)} columns, found {len(cells)}", lineno
            )
        row = dict(zip(CSV_COLUMNS, cells))
        try:
            row["step"] = int(row["step"])
            for col in _FLOAT_COLUMNS:
                row[col] = float(row[col])
        except ValueError as exc:
            raise CsvFormatError(str(exc), lineno) from exc
        for col in ("maneuver_r", "maneuver_b"):
            if row[col] and row[col].upper() not in Maneuver.__members__:
                raise CsvFormatError(f"unknown maneuver {row[col]!r}", lineno)
        rows.append(row)
    if not rows:
        raise CsvFormatError("no data rows", 2)
    return rows
