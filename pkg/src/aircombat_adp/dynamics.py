"""Point-mass flight dynamics for a single aircraft.

The model is a 3-DOF point mass controlled by a tangential overload Nx,
a normal overload Nz and a bank angle.  Seven discrete maneuvers map onto
fixed control triples; states advance with a classical fourth-order
Runge-Kutta step over the decision interval, followed by hard guards on
airspeed, pitch and yaw.

All functions here are pure and operate on either the scalar dataclasses
or on numpy arrays whose trailing axis holds the 7 state components
``[v, x, y, z, theta, psi, bank]``.  The batch path is the single source
of truth; scalar wrappers delegate to it, so both give bit-identical
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi

# Trailing-axis layout of a state array.
V, X, Y, Z, TH, PS, BK = range(7)
STATE_DIM = 7


class DegenerateStateError(ValueError):
    """Raised when a state makes the equations of motion singular."""


class Maneuver(Enum):
    """The seven discrete maneuvers, in library column order."""

    CONTINUED = 0
    ACCELERATION = 1
    DECELERATION = 2
    TURN_LEFT = 3
    TURN_RIGHT = 4
    PULL_UP = 5
    PUSH_DOWN = 6


MANEUVERS = tuple(Maneuver)


@dataclass(frozen=True)
class ControlInput:
    """Control triple: tangential overload, normal overload (g-units), bank (rad)."""

    nx: float
    nz: float
    bank: float


@dataclass(frozen=True)
class AircraftState:
    """Kinematic state of one craft.

    v     airspeed [m/s]
    x, y  east / north position [m]
    z     altitude [m]
    theta pitch angle [rad]
    psi   yaw angle measured from north [rad], kept in (-pi, pi]
    bank  last commanded roll angle [rad]
    """

    v: float
    x: float
    y: float
    z: float
    theta: float
    psi: float
    bank: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.v, self.x, self.y, self.z, self.theta, self.psi, self.bank],
            dtype=np.float64,
        )

    @staticmethod
    def from_array(a: np.ndarray) -> "AircraftState":
        return AircraftState(*(float(c) for c in a))


@dataclass(frozen=True)
class StateDerivative:
    """Time derivatives of the six integrated state components."""

    v_dot: float
    theta_dot: float
    psi_dot: float
    x_dot: float
    y_dot: float
    z_dot: float


@dataclass(frozen=True)
class DynamicsConfig:
    """Physical constants, decision interval and state guards."""

    g: float = 9.81
    dt: float = 0.25
    v_min: float = 50.0
    v_max: float = 400.0
    theta_max: float = math.radians(85.0)
    # Nx used by the deceleration maneuver; the library lists 0, which makes
    # it identical to continued flight.  Kept overridable for experiments.
    deceleration_nx: float = 0.0

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.v_min <= 0.0 or self.v_min >= self.v_max:
            raise ValueError(f"need 0 < v_min < v_max, got [{self.v_min}, {self.v_max}]")
        if not 0.0 < self.theta_max < math.pi / 2:
            raise ValueError(f"theta_max must lie in (0, pi/2), got {self.theta_max}")


_MANEUVER_CONTROLS = {
    Maneuver.CONTINUED: ControlInput(0.0, 1.0, 0.0),
    Maneuver.ACCELERATION: ControlInput(2.0, 1.0, 0.0),
    Maneuver.DECELERATION: ControlInput(0.0, 1.0, 0.0),
    Maneuver.TURN_LEFT: ControlInput(0.0, 5.0, -math.pi / 3),
    Maneuver.TURN_RIGHT: ControlInput(0.0, 5.0, math.pi / 3),
    Maneuver.PULL_UP: ControlInput(0.0, 5.0, 0.0),
    Maneuver.PUSH_DOWN: ControlInput(0.0, -5.0, 0.0),
}


def maneuver_controls(m: Maneuver, cfg: DynamicsConfig | None = None) -> ControlInput:
    """Control triple for a maneuver command.

    With a config whose ``deceleration_nx`` differs from 0, the deceleration
    column uses that Nx instead of the printed value.
    """
    u = _MANEUVER_CONTROLS[m]
    if cfg is not None and m is Maneuver.DECELERATION and cfg.deceleration_nx != 0.0:
        return ControlInput(cfg.deceleration_nx, u.nz, u.bank)
    return u


def wrap_yaw(psi):
    """Wrap an angle (scalar or array) into (-pi, pi].

    Idempotent on values already in range.
    """
    return math.pi - np.mod(math.pi - np.asarray(psi, dtype=np.float64), TWO_PI)


def _derivative_arrays(states: np.ndarray, nx, nz, bank, g: float) -> np.ndarray:
    """Equations-of-motion right-hand side on a (..., 7) state array.

    Returns rates aligned with the state layout; the bank column is zero
    (bank is a control, not an integrated state).
    """
    v = states[..., V]
    theta = states[..., TH]
    psi = states[..., PS]
    cos_t = np.cos(theta)
    if np.any(v <= 0.0) or np.any(np.abs(cos_t) < 1e-9):
        raise DegenerateStateError(
            "dynamics singular: requires v > 0 and |cos(theta)| >= 1e-9"
        )
    rates = np.zeros_like(states)
    rates[..., V] = g * (nx - np.sin(theta))
    rates[..., TH] = (nz * np.cos(bank) - cos_t) * g / v
    rates[..., PS] = g * nz * np.sin(bank) / (v * cos_t)
    rates[..., X] = v * cos_t * np.sin(psi)
    rates[..., Y] = v * cos_t * np.cos(psi)
    rates[..., Z] = v * np.sin(theta)
    return rates


def apply_state_guards(states: np.ndarray, cfg: DynamicsConfig) -> np.ndarray:
    """Clamp airspeed and pitch, wrap yaw.  Idempotent."""
    out = np.array(states, dtype=np.float64, copy=True)
    out[..., V] = np.clip(out[..., V], cfg.v_min, cfg.v_max)
    out[..., TH] = np.clip(out[..., TH], -cfg.theta_max, cfg.theta_max)
    out[..., PS] = wrap_yaw(out[..., PS])
    return out


def rk4_step_arrays(
    states: np.ndarray,
    nx,
    nz,
    bank,
    cfg: DynamicsConfig,
    substeps: int = 1,
) -> np.ndarray:
    """Advance a (..., 7) state array one decision interval under constant controls.

    ``substeps`` splits dt into equal RK4 sub-intervals (used by convergence
    tests; the production path uses one step per decision).
    """
    h = cfg.dt / substeps
    cur = np.asarray(states, dtype=np.float64)
    for _ in range(substeps):
        k1 = _derivative_arrays(cur, nx, nz, bank, cfg.g)
        k2 = _derivative_arrays(cur + 0.5 * h * k1, nx, nz, bank, cfg.g)
        k3 = _derivative_arrays(cur + 0.5 * h * k2, nx, nz, bank, cfg.g)
        k4 = _derivative_arrays(cur + h * k3, nx, nz, bank, cfg.g)
        cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = apply_state_guards(cur, cfg)
    out[..., BK] = bank
    return out


def state_derivative(
    s: AircraftState, u: ControlInput, cfg: DynamicsConfig
) -> StateDerivative:
    """Instantaneous rates for one craft under a control triple."""
    rates = _derivative_arrays(s.as_array(), u.nx, u.nz, u.bank, cfg.g)
    return StateDerivative(
        v_dot=float(rates[V]),
        theta_dot=float(rates[TH]),
        psi_dot=float(rates[PS]),
        x_dot=float(rates[X]),
        y_dot=float(rates[Y]),
        z_dot=float(rates[Z]),
    )


def rk4_step(
    s: AircraftState, u: ControlInput, cfg: DynamicsConfig, substeps: int = 1
) -> AircraftState:
    """One guarded RK4 step of a single craft; returns a new state."""
    out = rk4_step_arrays(s.as_array(), u.nx, u.nz, u.bank, cfg, substeps=substeps)
    return AircraftState.from_array(out)


def specific_energy(v, z, g: float = 9.81):
    """Specific energy z + v^2 / (2 g); conserved by the model when Nx = 0."""
    v = np.asarray(v, dtype=np.float64)
    return np.asarray(z, dtype=np.float64) + v * v / (2.0 * g)
