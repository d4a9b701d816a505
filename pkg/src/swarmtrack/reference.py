"""Target trajectory programs and reference-velocity generation.

The outer control loop steers the group centroid by publishing a reference
velocity: the target's own velocity plus a weighted pull toward the target
position. Feedforward terms for time-varying references need the reference's
turn rate and speed rate, which are finite-differenced here when no closed
form exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import norm, vec2, wrap_angle


# --------------------------------------------------------------------------
# Weight functions


@dataclass(frozen=True)
class ConstantWeight:
    """w(rho) = value, a fixed positive pull gain in 1/s."""

    value: float

    def __post_init__(self):
        if self.value <= 0.0:
            raise ValueError(f"constant weight must be positive, got {self.value}")

    def __call__(self, rho: float) -> float:
        return self.value


@dataclass(frozen=True)
class DistanceDependentWeight:
    """w(rho) = (1/rho)(1 - e^{-scale*rho}), continuously extended by w(0) = scale.

    Strictly decreasing in rho and bounded above by `scale`, so the position
    pull w(rho)*rho = 1 - e^{-scale*rho} saturates at 1 m/s for far targets.
    """

    scale: float

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError(f"weight scale must be positive, got {self.scale}")

    def __call__(self, rho: float) -> float:
        if rho == 0.0:
            return self.scale
        return -math.expm1(-self.scale * rho) / rho


# Either weight variant; they only need to be callable on rho >= 0.
WeightFunction = ConstantWeight | DistanceDependentWeight


# --------------------------------------------------------------------------
# Target programs


@dataclass(frozen=True)
class ConstantVelocityTarget:
    """Target moving in a straight line at fixed velocity."""

    initial_position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial_position", np.asarray(self.initial_position, float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, float))

    def state(self, t: float):
        return self.initial_position + t * self.velocity, self.velocity.copy()

    def max_speed(self) -> float:
        return norm(self.velocity)


@dataclass(frozen=True)
class TurningTarget:
    """Target on a constant-rate turn: speed v, heading h0 + kappa*t.

    kappa = 0 degenerates to straight-line motion.
    """

    initial_position: np.ndarray
    speed: float
    kappa: float
    heading0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "initial_position", np.asarray(self.initial_position, float))
        if self.speed <= 0.0:
            raise ValueError(f"turning-target speed must be positive, got {self.speed}")

    def state(self, t: float):
        th = self.heading0 + self.kappa * t
        vel = vec2(self.speed * math.cos(th), self.speed * math.sin(th))
        if self.kappa == 0.0:
            pos = self.initial_position + t * vel
        else:
            r = self.speed / self.kappa
            pos = self.initial_position + vec2(
                r * (math.sin(th) - math.sin(self.heading0)),
                r * (math.cos(self.heading0) - math.cos(th)),
            )
        return pos, vel

    def max_speed(self) -> float:
        return self.speed


@dataclass(frozen=True)
class WaypointTarget:
    """Piecewise-linear path at constant speed with an initial dwell.

    The target sits at the first waypoint for `dwell` seconds, then traverses
    the waypoint list at `speed`, changing velocity direction (but not speed)
    instantaneously at each waypoint. With closed=True the path loops back to
    the first waypoint indefinitely; otherwise the target stops at the last
    waypoint.
    """

    waypoints: tuple
    speed: float
    dwell: float = 0.0
    closed: bool = True

    def __post_init__(self):
        wps = tuple(np.asarray(w, dtype=float) for w in self.waypoints)
        if len(wps) == 0:
            raise ValueError("waypoint list must not be empty")
        for a, b in zip(wps, wps[1:]):
            if norm(b - a) == 0.0:
                raise ValueError("consecutive duplicate waypoints (zero-length segment)")
        object.__setattr__(self, "waypoints", wps)
        if self.speed <= 0.0:
            raise ValueError(f"waypoint-target speed must be positive, got {self.speed}")
        if self.dwell < 0.0:
            raise ValueError("dwell must be non-negative")

    def _segments(self):
        pts = list(self.waypoints)
        if self.closed and len(pts) > 1:
            pts.append(pts[0])
        return pts

    def state(self, t: float):
        first = self.waypoints[0]
        if t <= self.dwell or len(self.waypoints) == 1:
            return first.copy(), vec2(0.0, 0.0)
        pts = self._segments()
        lengths = [norm(b - a) for a, b in zip(pts, pts[1:])]
        total = sum(lengths)
        s = self.speed * (t - self.dwell)
        if self.closed:
            s = math.fmod(s, total)
        elif s >= total:
            return pts[-1].copy(), vec2(0.0, 0.0)
        for a, b, seg_len in zip(pts, pts[1:], lengths):
            if s < seg_len:
                direction = (b - a) / seg_len
                return a + s * direction, self.speed * direction
            s -= seg_len
        # Closed path with s landing exactly on total after fmod rounding.
        a, b = pts[0], pts[1]
        direction = (b - a) / lengths[0]
        return a.copy(), self.speed * direction

    def max_speed(self) -> float:
        return self.speed


TargetProgram = ConstantVelocityTarget | TurningTarget | WaypointTarget


def target_state(program: TargetProgram, t: float):
    """Closed-form (position, velocity) of a target program at time t >= 0."""
    if t < 0.0:
        raise ValueError(f"t must be non-negative, got {t}")
    return program.state(t)


# --------------------------------------------------------------------------
# Reference signal


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference trajectory sample: position, polar velocity, and its rates.

    kappa_ref is the reference heading rate (rad/s) and a_ref the reference
    speed rate (m/s^2); both feed the feedforward solve.
    """

    position: np.ndarray
    v_ref: float
    theta_ref: float
    kappa_ref: float = 0.0
    a_ref: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.v_ref < 0.0:
            raise ValueError("v_ref must be non-negative")

    @property
    def velocity(self) -> np.ndarray:
        return vec2(
            self.v_ref * math.cos(self.theta_ref), self.v_ref * math.sin(self.theta_ref)
        )


def polar_velocity(velocity, fallback_theta: float = 0.0):
    """(speed, heading) of a planar velocity; heading falls back when at rest."""
    v = norm(velocity)
    if v == 0.0:
        return 0.0, fallback_theta
    return v, math.atan2(velocity[1], velocity[0])


def reference_velocity(target_pos, target_vel, centroid, w: WeightFunction) -> np.ndarray:
    """Reference velocity command: target velocity plus weighted position pull.

    Returns target_vel + w(rho) * (target_pos - centroid) with
    rho = ||target_pos - centroid||. At rho = 0 this is exactly the target
    velocity (the continuous extension of the weight keeps w finite).
    """
    target_pos = np.asarray(target_pos, dtype=float)
    target_vel = np.asarray(target_vel, dtype=float)
    centroid = np.asarray(centroid, dtype=float)
    offset = target_pos - centroid
    rho = norm(offset)
    if rho == 0.0:
        return target_vel.copy()
    return target_vel + w(rho) * offset


class ReferenceDifferentiator:
    """Backward finite differences of a sampled reference velocity.

    Feeding one velocity sample per step yields (kappa_ref, a_ref) estimates:
    kappa from the wrapped heading increment, a from the speed increment. The
    first sample returns (0, 0); a zero-speed sample holds the previous
    heading so kappa stays defined.
    """

    def __init__(self, dt: float):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.dt = dt
        self._prev = None  # (speed, heading)

    @property
    def polar(self):
        """(speed, heading) of the most recent sample, or None before any."""
        return self._prev

    def update(self, velocity):
        v, th = polar_velocity(
            velocity, fallback_theta=self._prev[1] if self._prev else 0.0
        )
        if self._prev is None:
            self._prev = (v, th)
            return 0.0, 0.0
        v0, th0 = self._prev
        kappa = wrap_angle(th - th0) / self.dt
        a = (v - v0) / self.dt
        self._prev = (v, th)
        return kappa, a


def reference_derivatives(samples, dt: float):
    """(kappa_ref, a_ref) from the last two of a sequence of velocity samples."""
    diff = ReferenceDifferentiator(dt)
    out = (0.0, 0.0)
    for s in samples:
        out = diff.update(s)
    return out
