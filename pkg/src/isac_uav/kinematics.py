"""Planar constant-acceleration kinematics and ground-truth trajectories.

State layout everywhere is ``[x, y, vx, vy, ax, ay]`` in metres, m/s and
m/s^2.  The filter uses the constant-acceleration model; turning motion is
only used to generate ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

STATE_DIM = 6
TURNS = ("left", "straight", "right")


def wrap_angle(angle):
    """Map an angle (scalar or array) into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class TargetState:
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.to_array())):
            raise DomainError(f"non-finite target state {self}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy, self.ax, self.ay], dtype=float)

    @classmethod
    def from_array(cls, values) -> "TargetState":
        arr = np.asarray(values, dtype=float).reshape(STATE_DIM)
        return cls(*(float(v) for v in arr))

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class ObserverPose:
    x0: float
    y0: float
    heading: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x0, self.y0, self.heading)):
            raise DomainError(f"non-finite observer pose {self}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @classmethod
    def from_state(cls, state: TargetState, fallback_heading: float = 0.0) -> "ObserverPose":
        if state.speed > 0.0:
            heading = math.atan2(state.vy, state.vx)
        else:
            heading = fallback_heading
        return cls(state.x, state.y, heading)


@dataclass(frozen=True)
class Maneuver:
    """Turn command active on steps ``start <= i < end``."""

    start: int
    end: int
    turn: str = "straight"


@dataclass(frozen=True)
class MotionProfile:
    speed: float
    acceleration: float = 0.0
    angular_speed: float = 0.0
    initial_heading: float = 0.0
    schedule: tuple[Maneuver, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("speed", "acceleration", "angular_speed", "initial_heading"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
        if self.speed < 0:
            raise DomainError(f"speed must be >= 0, got {self.speed}")
        if self.acceleration < 0:
            raise DomainError(f"acceleration must be >= 0, got {self.acceleration}")
        if self.angular_speed < 0:
            raise DomainError(f"angular_speed must be >= 0, got {self.angular_speed}")
        object.__setattr__(self, "schedule", tuple(self.schedule))
        previous_end = 0
        for m in self.schedule:
            if m.turn not in TURNS:
                raise DomainError(f"unknown turn direction {m.turn!r}")
            if m.start < 0 or m.end <= m.start:
                raise DomainError(f"empty or negative maneuver interval {m}")
            if m.start < previous_end:
                raise DomainError("maneuver schedule must be ordered and non-overlapping")
            previous_end = m.end

    def turn_at(self, step: int) -> str:
        for m in self.schedule:
            if m.start <= step < m.end:
                return m.turn
        return "straight"


def _check_dt(dt, allow_zero=False):
    if not math.isfinite(dt) or dt < 0 or (dt == 0 and not allow_zero):
        raise DomainError(f"time step must be {'>=' if allow_zero else '>'} 0, got {dt}")


def motion_jacobian(dt: float) -> np.ndarray:
    """Transition matrix of the constant-acceleration model.

    The model is linear, so this is both ``F`` and the Jacobian of
    :func:`propagate_state`.
    """
    _check_dt(dt, allow_zero=True)
    F = np.eye(STATE_DIM)
    F[0, 2] = F[1, 3] = F[2, 4] = F[3, 5] = dt
    F[0, 4] = F[1, 5] = 0.5 * dt * dt
    return F


def propagate_state(s, dt: float):
    """Advance a state by ``dt`` seconds under constant acceleration.

    Accepts a :class:`TargetState` or a length-6 array and returns the
    same kind.
    """
    _check_dt(dt)
    is_state = isinstance(s, TargetState)
    arr = s.to_array() if is_state else np.asarray(s, dtype=float)
    if arr.shape != (STATE_DIM,):
        raise DomainError(f"state must have shape ({STATE_DIM},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite state")
    x, y, vx, vy, ax, ay = arr
    half_dt2 = 0.5 * dt * dt
    out = np.array(
        [
            x + vx * dt + ax * half_dt2,
            y + vy * dt + ay * half_dt2,
            vx + ax * dt,
            vy + ay * dt,
            ax,
            ay,
        ]
    )
    return TargetState.from_array(out) if is_state else out


def _turn_step(arr: np.ndarray, rate: float, dt: float) -> np.ndarray:
    # exact constant-speed arc
    x, y, vx, vy = arr[:4]
    theta = rate * dt
    c, s = math.cos(theta), math.sin(theta)
    nvx, nvy = c * vx - s * vy, s * vx + c * vy
    if rate == 0.0:
        nx, ny = x + vx * dt, y + vy * dt
    else:
        nx = x + (s * vx - (1.0 - c) * vy) / rate
        ny = y + ((1.0 - c) * vx + s * vy) / rate
    return np.array([nx, ny, nvx, nvy, -rate * nvy, rate * nvx])


def _straight_step(arr: np.ndarray, profile: MotionProfile, dt: float) -> np.ndarray:
    vx, vy = arr[2], arr[3]
    speed = math.hypot(vx, vy)
    if speed > 0.0:
        ux, uy = vx / speed, vy / speed
    else:
        ux, uy = math.cos(profile.initial_heading), math.sin(profile.initial_heading)
    a = profile.acceleration
    if a <= 0.0 or speed >= profile.speed:
        coast = arr.copy()
        coast[4:] = 0.0
        return propagate_state(coast, dt)
    # accelerate along the velocity direction until the speed cap is hit
    t_cap = (profile.speed - speed) / a
    out = arr.copy()
    out[4:] = (a * ux, a * uy)
    if t_cap >= dt:
        return propagate_state(out, dt)
    out = propagate_state(out, t_cap)
    out[2:4] = (profile.speed * ux, profile.speed * uy)
    out[4:] = 0.0
    return propagate_state(out, dt - t_cap)


def generate_trajectory(
    profile: MotionProfile, start: TargetState, n_steps: int, dt: float
) -> list[TargetState]:
    """Ground-truth trajectory of ``n_steps + 1`` states beginning at ``start``.

    Turn intervals rotate the velocity at ``profile.angular_speed`` with the
    speed held; straight intervals accelerate along the velocity up to
    ``profile.speed`` and then coast.
    """
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    _check_dt(dt)
    arr = start.to_array()
    states = [start]
    for step in range(n_steps):
        turn = profile.turn_at(step)
        if turn == "straight":
            arr = _straight_step(arr, profile, dt)
        else:
            sign = 1.0 if turn == "left" else -1.0
            arr = _turn_step(arr, sign * profile.angular_speed, dt)
        states.append(TargetState.from_array(arr))
    return states


def initial_state(profile: MotionProfile, x: float, y: float, speed: float) -> TargetState:
    """State at ``(x, y)`` moving at ``speed`` along the profile heading.

    The acceleration field carries the profile acceleration when the start
    speed is below the cap.
    """
    c, s = math.cos(profile.initial_heading), math.sin(profile.initial_heading)
    a = profile.acceleration if speed < profile.speed else 0.0
    return TargetState(x, y, speed * c, speed * s, a * c, a * s)
