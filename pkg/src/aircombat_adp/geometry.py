"""Relative combat geometry, shaped rewards and the win/termination predicate.

Angle conventions (tail-referenced, consistent with the dynamics heading
vector ``(cos(theta) sin(psi), cos(theta) cos(psi), sin(theta))``):

* ATA (antenna train angle): angle between own velocity and the line of
  sight to the opponent; 0 when pointing straight at the opponent.
* AA (aspect angle): angle between the opponent's tail direction and the
  line of sight from the opponent back to self; 0 when sitting on the
  opponent's six.

Both are in [0, pi].  The two perspectives are exact complements:
red-perspective ATA + blue-perspective AA = pi, and vice versa.

Batch functions operate on combat arrays of shape (..., 15):
red state columns 0..6, blue state columns 7..13, step counter column 14.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import AircraftState, STATE_DIM, TH, PS, V, X, Y, Z

COMBAT_DIM = 2 * STATE_DIM + 1
STEP_COL = 2 * STATE_DIM

# Minimum separation below which the geometry is treated as degenerate.
MIN_RANGE_M = 1.0


class CoincidentPositionError(ValueError):
    """Raised when the two aircraft are (numerically) at the same point."""


class Perspective(Enum):
    RED = "red"
    BLUE = "blue"


class Outcome(Enum):
    ONGOING = "ongoing"
    RED_WIN = "red_win"
    BLUE_WIN = "blue_win"
    DRAW = "draw"


# Integer codes used by the batch outcome path.
_OUTCOME_BY_CODE = (Outcome.ONGOING, Outcome.RED_WIN, Outcome.BLUE_WIN, Outcome.DRAW)
CODE_ONGOING, CODE_RED_WIN, CODE_BLUE_WIN, CODE_DRAW = range(4)


@dataclass(frozen=True)
class CombatState:
    """Paired red/blue aircraft states plus elapsed decision steps."""

    red: AircraftState
    blue: AircraftState
    step: int = 0

    def as_array(self) -> np.ndarray:
        out = np.empty(COMBAT_DIM, dtype=np.float64)
        out[:STATE_DIM] = self.red.as_array()
        out[STATE_DIM : 2 * STATE_DIM] = self.blue.as_array()
        out[STEP_COL] = float(self.step)
        return out

    @staticmethod
    def from_array(a: np.ndarray) -> "CombatState":
        return CombatState(
            red=AircraftState.from_array(a[:STATE_DIM]),
            blue=AircraftState.from_array(a[STATE_DIM : 2 * STATE_DIM]),
            step=int(a[STEP_COL]),
        )


@dataclass(frozen=True)
class RelativeGeometry:
    """AA/ATA [rad], range [m], and signed self-minus-other speed/height gaps."""

    aa: float
    ata: float
    range: float
    dv: float
    dh: float


@dataclass(frozen=True)
class RewardConfig:
    """Shaped-reward constants and the dominated-area bounds.

    ``max_range`` optionally gates domination on separation; the default
    (None) uses the purely angular win region.
    """

    r_d: float = 500.0
    k: float = 200.0
    v_scale: float = 100.0
    h_scale: float = 1000.0
    ata_max: float = 1.1
    aa_max: float = 0.6
    weights: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    max_range: float | None = None

    def __post_init__(self) -> None:
        for name in ("r_d", "k", "v_scale", "h_scale", "ata_max", "aa_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_range is not None and self.max_range <= 0.0:
            raise ValueError("max_range must be strictly positive when set")


def _split(arr: np.ndarray, perspective: Perspective):
    """(self_states, other_states) views of a (..., 15) combat array."""
    red = arr[..., :STATE_DIM]
    blue = arr[..., STATE_DIM : 2 * STATE_DIM]
    return (red, blue) if perspective is Perspective.RED else (blue, red)


def _heading(states: np.ndarray) -> np.ndarray:
    """Unit velocity direction (..., 3) matching the dynamics convention."""
    cos_t = np.cos(states[..., TH])
    return np.stack(
        [
            cos_t * np.sin(states[..., PS]),
            cos_t * np.cos(states[..., PS]),
            np.sin(states[..., TH]),
        ],
        axis=-1,
    )


def geometry_arrays(arr: np.ndarray, perspective: Perspective):
    """AA, ATA, range, dv, dh as arrays over a (..., 15) combat array."""
    me, other = _split(arr, perspective)
    # Line of sight from other toward self (the printed convention).
    d = np.stack(
        [me[..., X] - other[..., X], me[..., Y] - other[..., Y], me[..., Z] - other[..., Z]],
        axis=-1,
    )
    rng = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(rng < MIN_RANGE_M):
        raise CoincidentPositionError(
            f"aircraft separation below {MIN_RANGE_M} m; geometry undefined"
        )
    d_hat = d / rng[..., None]
    ata = math.pi - np.arccos(np.clip(np.sum(_heading(me) * d_hat, axis=-1), -1.0, 1.0))
    aa = math.pi - np.arccos(np.clip(np.sum(_heading(other) * d_hat, axis=-1), -1.0, 1.0))
    dv = me[..., V] - other[..., V]
    dh = me[..., Z] - other[..., Z]
    return aa, ata, rng, dv, dh


def relative_geometry(cs: CombatState, perspective: Perspective) -> RelativeGeometry:
    """Relative geometry of one perspective; errors if the craft coincide."""
    aa, ata, rng, dv, dh = geometry_arrays(cs.as_array(), perspective)
    return RelativeGeometry(
        aa=float(aa), ata=float(ata), range=float(rng), dv=float(dv), dh=float(dh)
    )


def distance_angle_reward(geom: RelativeGeometry, cfg: RewardConfig) -> float:
    """Angle-and-range shaping term, in [0, 1], peaked at range == r_d."""
    return float(
        _distance_angle_arrays(
            np.asarray(geom.aa), np.asarray(geom.ata), np.asarray(geom.range), cfg
        )
    )


def _distance_angle_arrays(aa, ata, rng, cfg: RewardConfig):
    angle_term = ((1.0 - np.abs(aa) / math.pi) + (1.0 - np.abs(ata) / math.pi)) / 2.0
    return angle_term * np.exp(-np.abs(rng - cfg.r_d) / (cfg.k * math.pi))


def scaled_component_rewards(
    geom: RelativeGeometry, cfg: RewardConfig
) -> tuple[float, float]:
    """Speed-gap and height-gap rewards, each linearly scaled and clamped to [-1, 1]."""
    r1 = float(np.clip(geom.dv / cfg.v_scale, -1.0, 1.0))
    r2 = float(np.clip(geom.dh / cfg.h_scale, -1.0, 1.0))
    return r1, r2


def reward_arrays(arr: np.ndarray, perspective: Perspective, cfg: RewardConfig):
    """Total shaped reward over a (..., 15) combat array."""
    aa, ata, rng, dv, dh = geometry_arrays(arr, perspective)
    r1 = np.clip(dv / cfg.v_scale, -1.0, 1.0)
    r2 = np.clip(dh / cfg.h_scale, -1.0, 1.0)
    r3 = _distance_angle_arrays(aa, ata, rng, cfg)
    w1, w2, w3 = cfg.weights
    return w1 * r1 + w2 * r2 + w3 * r3


def total_reward(cs: CombatState, perspective: Perspective, cfg: RewardConfig) -> float:
    """Weighted sum of the three shaped rewards; in [-2/3, 1] at default weights."""
    return float(reward_arrays(cs.as_array(), perspective, cfg))


def features_arrays(arr: np.ndarray, perspective: Perspective) -> np.ndarray:
    """Raw value-function features [aa, ata, dh, dv, range] over a combat array."""
    aa, ata, rng, dv, dh = geometry_arrays(arr, perspective)
    return np.stack([aa, ata, dh, dv, rng], axis=-1)


def features(cs: CombatState, perspective: Perspective) -> np.ndarray:
    """Raw 5-component feature vector for one state."""
    return features_arrays(cs.as_array(), perspective)


def dominated_arrays(arr: np.ndarray, winner: Perspective, cfg: RewardConfig):
    """Boolean array: winner holds the angular (optionally range-gated) win region."""
    aa, ata, rng, _, _ = geometry_arrays(arr, winner)
    dom = (ata < cfg.ata_max) & (aa < cfg.aa_max)
    if cfg.max_range is not None:
        dom &= rng < cfg.max_range
    return dom


def is_dominated(cs: CombatState, winner: Perspective, cfg: RewardConfig) -> bool:
    """True when the winner sits inside the opponent's dominated area."""
    return bool(dominated_arrays(cs.as_array(), winner, cfg))


def outcome_codes(arr: np.ndarray, max_steps: int, cfg: RewardConfig) -> np.ndarray:
    """Integer outcome codes over a (..., 15) combat array.

    Mutual domination and the step cap both score as a draw.
    """
    red_dom = dominated_arrays(arr, Perspective.RED, cfg)
    blue_dom = dominated_arrays(arr, Perspective.BLUE, cfg)
    capped = arr[..., STEP_COL] >= max_steps
    codes = np.where(
        red_dom & blue_dom,
        CODE_DRAW,
        np.where(
            red_dom,
            CODE_RED_WIN,
            np.where(blue_dom, CODE_BLUE_WIN, np.where(capped, CODE_DRAW, CODE_ONGOING)),
        ),
    )
    return codes


def terminal_status(cs: CombatState, max_steps: int, cfg: RewardConfig) -> Outcome:
    """Episode status for one state."""
    code = int(outcome_codes(cs.as_array(), max_steps, cfg))
    return _OUTCOME_BY_CODE[code]
