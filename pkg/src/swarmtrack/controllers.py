"""Heading-rate control laws.

Three stacked terms per agent, each a pure function of a snapshot and the
reference signal:

* a velocity-tracking term, the gradient flow of V = 0.5*||rhat_dot - ref||^2
  in the headings;
* a feedforward term h solving the 2 x n linear system A h = b that cancels
  the reference's time variation (turn rate and speed rate);
* a beacon spacing term pulling each vehicle onto a bounded orbit around the
  reference point, optionally projected into ker(A) so it provably does not
  disturb the velocity-error dynamics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Snapshot, VehicleState, heading_vector, rotate90, scalar_product
from .reference import ReferenceSignal


class SpacingMode(enum.Enum):
    OFF = "off"
    BEACON = "beacon"
    BEACON_PROJECTED = "beacon_projected"


@dataclass(frozen=True)
class ControllerGains:
    """Gains shared by the control terms.

    gamma is the velocity-tracking gain and is reused inside the spacing law;
    omega0 is the beacon angular rate. u_max, when set, symmetrically clamps
    the total command (the decomposition is logged unclamped). feedforward
    toggles the h term.
    """

    gamma: float
    omega0: float = 0.25
    spacing_mode: SpacingMode = SpacingMode.OFF
    u_max: float | None = None
    feedforward: bool = True

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.omega0 <= 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.u_max is not None and self.u_max <= 0.0:
            raise ValueError("u_max must be positive when set")


@dataclass(frozen=True)
class ControlInput:
    """Per-agent heading-rate command and its decomposition (all rad/s)."""

    u_velocity: float
    h_feedforward: float
    u_spacing: float
    total: float

    @classmethod
    def combine(cls, u_velocity, h_feedforward, u_spacing):
        return cls(
            u_velocity=float(u_velocity),
            h_feedforward=float(h_feedforward),
            u_spacing=float(u_spacing),
            total=float(u_velocity) + float(h_feedforward) + float(u_spacing),
        )


@dataclass(frozen=True)
class FeedforwardSolution:
    """Minimum-norm solution of A h = b, or the zero fallback when A is rank-deficient."""

    h: np.ndarray
    residual: float
    rank_ok: bool


def u_velocity(snapshot: Snapshot, k: int, ref_velocity, gamma: float) -> float:
    """Velocity-tracking heading rate for agent k (0-based index into the snapshot).

    u_k = -gamma * < rhat_dot - ref_velocity, i v_k e^{i th_k} >, the gradient
    flow of V = 0.5 ||rhat_dot - ref_velocity||^2, which yields
    Vdot = -(gamma/n) * sum_k <.,.>^2 along the closed loop.
    """
    err = snapshot.centroid_velocity() - np.asarray(ref_velocity, dtype=float)
    v, th = snapshot.speeds[k], snapshot.headings[k]
    # <err, i v e^{i th}> = err_x * (-v sin th) + err_y * (v cos th)
    bracket = -err[0] * v * math.sin(th) + err[1] * v * math.cos(th)
    return -gamma * bracket


def _u_velocity_all(snapshot: Snapshot, ref_velocity, gamma: float) -> np.ndarray:
    """Vectorized u_velocity over all agents (identical arithmetic per agent)."""
    err = snapshot.centroid_velocity() - np.asarray(ref_velocity, dtype=float)
    v, th = snapshot.speeds, snapshot.headings
    bracket = -err[0] * v * np.sin(th) + err[1] * v * np.cos(th)
    return -gamma * bracket


def build_A(snapshot: Snapshot) -> np.ndarray:
    """2 x n matrix with column k = (1/n) * i v_k e^{i th_k}.

    A maps stacked heading rates to the induced centroid acceleration, so the
    feedforward condition is A h = b.
    """
    v, th = snapshot.speeds, snapshot.headings
    n = snapshot.n
    return np.array([-v * np.sin(th), v * np.cos(th)]) / n


def _gram_solve(A: np.ndarray, rhs: np.ndarray):
    """Solve (A A^T) x = rhs for the 2x2 Gram matrix; returns (x, smin, ok).

    Explicit 2x2 arithmetic: cheap, allocation-free, and exact to rounding.
    smin is the smaller singular value of A.
    """
    g11 = float(A[0] @ A[0])
    g12 = float(A[0] @ A[1])
    g22 = float(A[1] @ A[1])
    tr = g11 + g22
    det = g11 * g22 - g12 * g12
    # Eigenvalues of the Gram matrix are the squared singular values of A.
    disc = math.sqrt(max((g11 - g22) ** 2 + 4.0 * g12 * g12, 0.0))
    lam_min = 0.5 * (tr - disc)
    lam_max = 0.5 * (tr + disc)
    smin = math.sqrt(max(lam_min, 0.0))
    smax = math.sqrt(max(lam_max, 0.0))
    if smin <= 1e-8 * max(1.0, smax):
        return np.zeros(2), smin, False
    x = np.array(
        [
            (g22 * rhs[0] - g12 * rhs[1]) / det,
            (g11 * rhs[1] - g12 * rhs[0]) / det,
        ]
    )
    return x, smin, True


def feedforward_rhs(ref: ReferenceSignal, include_accel: bool = True) -> np.ndarray:
    """Right-hand side b of the feedforward system.

    The turn-rate part is kappa_ref * i * ref_velocity; with include_accel the
    speed-rate part a_ref * e^{i theta_ref} is added.
    """
    c, s = math.cos(ref.theta_ref), math.sin(ref.theta_ref)
    b = np.array([-ref.v_ref * s * ref.kappa_ref, ref.v_ref * c * ref.kappa_ref])
    if include_accel:
        b += ref.a_ref * np.array([c, s])
    return b


def solve_feedforward(
    snapshot: Snapshot, ref: ReferenceSignal, include_accel: bool = True
) -> FeedforwardSolution:
    """Minimum-2-norm h with A h = b.

    h = A^T (A A^T)^{-1} b via the 2x2 normal equations. When the smaller
    singular value of A is below tolerance (all headings aligned mod pi) the
    system may be unsolvable; h = 0 is returned with rank_ok = False rather
    than raising, since such configurations are unstable equilibria the closed
    loop escapes on its own.
    """
    A = build_A(snapshot)
    b = feedforward_rhs(ref, include_accel)
    x, _, ok = _gram_solve(A, b)
    if not ok:
        h = np.zeros(snapshot.n)
        return FeedforwardSolution(h=h, residual=float(np.linalg.norm(b)), rank_ok=False)
    h = A.T @ x
    residual = float(np.linalg.norm(A @ h - b))
    return FeedforwardSolution(h=h, residual=residual, rank_ok=True)


def u_spacing_beacon(state_k: VehicleState, ref_position, gains: ControllerGains) -> float:
    """Beacon spacing law for one vehicle.

    u = -(omega0 + gamma * omega0 * <r_k - r_ref, v_k e^{i th_k}>). Alone it
    settles the vehicle onto a clockwise orbit of bounded radius about the
    reference point.
    """
    rel = np.asarray(state_k.position, dtype=float) - np.asarray(ref_position, dtype=float)
    return -(gains.omega0 + gains.gamma * gains.omega0 * scalar_product(rel, heading_vector(state_k)))


def _spacing_raw_all(snapshot: Snapshot, ref_position, gains: ControllerGains) -> np.ndarray:
    """Vectorized raw beacon term for every agent in the snapshot."""
    rel = snapshot.positions - np.asarray(ref_position, dtype=float)
    hv = snapshot.heading_vectors()
    inner = rel[:, 0] * hv[:, 0] + rel[:, 1] * hv[:, 1]
    return -(gains.omega0 + gains.gamma * gains.omega0 * inner)


def project_spacing_to_kernel(u_spacing: np.ndarray, A: np.ndarray):
    """Project a spacing vector into ker(A): returns (projected, rank_ok).

    (I - A^T (A A^T)^{-1} A) u leaves the velocity-error dynamics untouched.
    With rank(A) < 2 the projector is ill-defined; the input is returned
    unchanged and flagged.
    """
    u_spacing = np.asarray(u_spacing, dtype=float)
    x, _, ok = _gram_solve(A, A @ u_spacing)
    if not ok:
        return u_spacing.copy(), False
    return u_spacing - A.T @ x, True


def swarm_controls(snapshot: Snapshot, ref: ReferenceSignal, gains: ControllerGains, mode: SpacingMode | None = None):
    """Full control decomposition for every agent in one snapshot.

    Computes the shared pieces (centroid velocity, A, the projected spacing
    vector) once. Returns a list of ControlInput in agent order.
    """
    mode = gains.spacing_mode if mode is None else mode
    u_vel = _u_velocity_all(snapshot, ref.velocity, gains.gamma)

    if gains.feedforward and (ref.kappa_ref != 0.0 or ref.a_ref != 0.0):
        h = solve_feedforward(snapshot, ref).h
    else:
        h = np.zeros(snapshot.n)

    if mode is SpacingMode.OFF:
        u_spc = np.zeros(snapshot.n)
    else:
        u_spc = _spacing_raw_all(snapshot, ref.position, gains)
        if mode is SpacingMode.BEACON_PROJECTED:
            u_spc, _ = project_spacing_to_kernel(u_spc, build_A(snapshot))

    return [
        ControlInput.combine(u_vel[k], h[k], u_spc[k]) for k in range(snapshot.n)
    ]


def combined_control(
    snapshot: Snapshot,
    k: int,
    ref: ReferenceSignal,
    gains: ControllerGains,
    mode: SpacingMode | None = None,
) -> ControlInput:
    """ControlInput for agent k (0-based): velocity + feedforward + spacing."""
    return swarm_controls(snapshot, ref, gains, mode)[k]


def saturate(total: float, u_max: float | None) -> float:
    """Optional symmetric clamp on the total command."""
    if u_max is None:
        return total
    return max(-u_max, min(u_max, total))
