"""Deterministic fixed-step simulation loop.

One step: sample the target, let every agent assemble its view of the swarm
(ground truth, or its own neighbor table in networked mode), form the
reference velocity, compute the three-term heading-rate command, integrate the
unicycle dynamics, then move broadcast traffic. Everything an analysis could
want is appended to a fixed-schema log, one record per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import check_feasibility, FeasibilityReport
from .controllers import ControllerGains, SpacingMode, saturate, swarm_controls
from .dynamics import Snapshot, rk4_unicycle_arrays, vec2, wrap_angle
from .netsim import SALT_DISTURB, BroadcastNetwork, NetworkConfig, counter_uniform
from .reference import (
    ConstantWeight,
    ReferenceDifferentiator,
    ReferenceSignal,
    TargetProgram,
    WeightFunction,
    polar_velocity,
    reference_velocity,
    target_state,
)


# --------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class AgentInit:
    position: np.ndarray
    heading: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class ConstantRef:
    """Fixed reference velocity; the outer target loop is bypassed."""

    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    def speed_bound(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class TurningRef:
    """Reference on a constant-rate turn; curvature is known in closed form."""

    speed: float
    kappa: float
    heading0: float = 0.0

    def speed_bound(self) -> float:
        return self.speed


@dataclass(frozen=True)
class TargetTracking:
    """Reference generated online from the target and the centroid estimate."""

    def speed_bound(self) -> float:  # resolved against the target program
        raise TypeError("TargetTracking bound comes from the target program")


ReferenceMode = ConstantRef | TurningRef | TargetTracking


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation run."""

    agents: tuple
    gains: ControllerGains
    reference_mode: ReferenceMode
    duration: float
    target: TargetProgram | None = None
    weight: WeightFunction | None = None
    network: NetworkConfig | None = None  # None = ground-truth information
    dt: float = 0.01
    seed: int = 0
    disturbance: float = 0.0
    allow_infeasible: bool = False

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) < 1:
            raise ValueError("at least one agent required")
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ValueError("dt and duration must be positive")
        if isinstance(self.reference_mode, TargetTracking):
            if self.target is None or self.weight is None:
                raise ValueError("target tracking requires a target program and a weight function")
        if self.disturbance < 0.0:
            raise ValueError("disturbance amplitude must be non-negative")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def speeds(self) -> np.ndarray:
        return np.array([a.speed for a in self.agents])

    def ref_speed_bound(self) -> float:
        if isinstance(self.reference_mode, TargetTracking):
            return self.target.max_speed()
        return self.reference_mode.speed_bound()

    def feasibility(self) -> FeasibilityReport:
        return check_feasibility(self.speeds, self.ref_speed_bound())


class InfeasibleScenario(RuntimeError):
    def __init__(self, report: FeasibilityReport):
        self.report = report
        super().__init__(
            "speeds cannot realize the reference: "
            f"v_min={report.v_min} vs bound={report.ref_speed_bound} (ok={report.condition1_ok}), "
            f"v_max={report.v_max} vs sum_others={report.sum_others} (ok={report.condition2_ok})"
        )


class SimulationAborted(RuntimeError):
    """Non-finite state encountered; carries the partial log."""

    def __init__(self, message: str, log: "RunLog"):
        self.log = log
        super().__init__(message)


# --------------------------------------------------------------------------
# Run log


@dataclass
class RunLog:
    """Fixed-schema per-step record arrays.

    Per-agent arrays have shape (rows, n). u_total is the applied command
    (including optional disturbance and saturation); u_vel/u_h/u_spc are the
    controller's decomposition. Network counters are cumulative; stale_count
    is the number of stale table entries seen this step. In networked mode the
    reference columns are the observer reference (driven by the true
    centroid); V and alpha_norm measure against it.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    u_vel: np.ndarray
    u_h: np.ndarray
    u_spc: np.ndarray
    u_total: np.ndarray
    dist_to_centroid: np.ndarray
    centroid: np.ndarray
    centroid_vel: np.ndarray
    ref_pos: np.ndarray
    ref_vel: np.ndarray
    target_pos: np.ndarray
    target_vel: np.ndarray
    V: np.ndarray
    beta_norm: np.ndarray
    alpha_norm: np.ndarray
    net_sent: np.ndarray
    net_decisions: np.ndarray
    net_delivered: np.ndarray
    net_dropped: np.ndarray
    stale_count: np.ndarray
    speeds: np.ndarray
    dt: float
    seed: int
    aborted: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]


def _alloc_log(rows: int, n: int, speeds, dt: float, seed: int) -> RunLog:
    f = lambda *shape: np.zeros(shape)
    i = lambda *shape: np.zeros(shape, dtype=np.int64)
    return RunLog(
        t=f(rows),
        x=f(rows, n),
        y=f(rows, n),
        theta=f(rows, n),
        u_vel=f(rows, n),
        u_h=f(rows, n),
        u_spc=f(rows, n),
        u_total=f(rows, n),
        dist_to_centroid=f(rows, n),
        centroid=f(rows, 2),
        centroid_vel=f(rows, 2),
        ref_pos=f(rows, 2),
        ref_vel=f(rows, 2),
        target_pos=f(rows, 2),
        target_vel=f(rows, 2),
        V=f(rows),
        beta_norm=f(rows),
        alpha_norm=f(rows),
        net_sent=i(rows),
        net_decisions=i(rows),
        net_delivered=i(rows),
        net_dropped=i(rows),
        stale_count=i(rows),
        speeds=np.asarray(speeds, dtype=float).copy(),
        dt=dt,
        seed=seed,
    )


def _truncate_log(log: RunLog, rows: int) -> RunLog:
    for name in (
        "t", "x", "y", "theta", "u_vel", "u_h", "u_spc", "u_total",
        "dist_to_centroid", "centroid", "centroid_vel", "ref_pos", "ref_vel",
        "target_pos", "target_vel", "V", "beta_norm", "alpha_norm",
        "net_sent", "net_decisions", "net_delivered", "net_dropped", "stale_count",
    ):
        setattr(log, name, getattr(log, name)[:rows])
    return log


# --------------------------------------------------------------------------
# Reference streams


class _RefStream:
    """One integrated copy of the generated reference trajectory.

    In networked mode each agent owns one (fed by its own centroid estimate
    and target table); an extra observer copy, fed by ground truth, is what
    the log reports.
    """

    def __init__(self, position0, dt: float):
        self.position = np.asarray(position0, dtype=float).copy()
        self._diff = ReferenceDifferentiator(dt)
        self._vel = vec2(0.0, 0.0)

    def sample(self, velocity) -> ReferenceSignal:
        kappa, a = self._diff.update(velocity)
        v, th = self._diff.polar
        self._vel = np.asarray(velocity, dtype=float)
        return ReferenceSignal(
            position=self.position, v_ref=v, theta_ref=th, kappa_ref=kappa, a_ref=a
        )

    def advance(self, dt: float):
        self.position = self.position + self._vel * dt


class _ClosedFormRef:
    """ConstantRef / TurningRef evaluated analytically each step."""

    def __init__(self, mode: ReferenceMode, position0, dt: float):
        self.mode = mode
        self.p0 = np.asarray(position0, dtype=float).copy()
        self.dt = dt

    def signal(self, t: float) -> ReferenceSignal:
        if isinstance(self.mode, ConstantRef):
            vel = self.mode.velocity
            v, th = polar_velocity(vel)
            return ReferenceSignal(
                position=self.p0 + t * vel, v_ref=v, theta_ref=th, kappa_ref=0.0, a_ref=0.0
            )
        m: TurningRef = self.mode
        th = m.heading0 + m.kappa * t
        if m.kappa == 0.0:
            pos = self.p0 + t * m.speed * np.array([math.cos(m.heading0), math.sin(m.heading0)])
        else:
            r = m.speed / m.kappa
            pos = self.p0 + r * np.array(
                [math.sin(th) - math.sin(m.heading0), math.cos(m.heading0) - math.cos(th)]
            )
        return ReferenceSignal(
            position=pos, v_ref=m.speed, theta_ref=wrap_angle(th), kappa_ref=m.kappa, a_ref=0.0
        )


# --------------------------------------------------------------------------
# Main loop


def run(config: ScenarioConfig) -> RunLog:
    """Simulate a scenario and return its complete log.

    Deterministic: identical (config, seed) pairs produce bit-identical logs.
    Raises InfeasibleScenario unless allow_infeasible, and SimulationAborted
    (carrying the partial log) if the state ever goes non-finite.
    """
    report = config.feasibility()
    if not report.feasible and not config.allow_infeasible:
        raise InfeasibleScenario(report)

    n, dt = config.n, config.dt
    steps = int(round(config.duration / dt))
    gains = config.gains
    speeds = config.speeds
    x = np.array([a.position[0] for a in config.agents])
    y = np.array([a.position[1] for a in config.agents])
    th = np.array([wrap_angle(a.heading) for a in config.agents])

    log = _alloc_log(steps, n, speeds, dt, config.seed)
    log.meta["feasibility"] = report
    centroid0 = vec2(x.mean(), y.mean())

    tracking = isinstance(config.reference_mode, TargetTracking)
    closed_ref = None if tracking else _ClosedFormRef(config.reference_mode, centroid0, dt)
    obs_stream = _RefStream(centroid0, dt) if tracking else None

    net = None
    agent_streams = None
    if config.network is not None:
        net_cfg = config.network
        if net_cfg.seed == 0:
            net_cfg = replace(net_cfg, seed=config.seed)
        net = BroadcastNetwork(net_cfg, n)
        tpos0, tvel0 = (target_state(config.target, 0.0) if config.target is not None else (None, None))
        vel0 = np.column_stack((speeds * np.cos(th), speeds * np.sin(th)))
        net.initialize(np.column_stack((x, y)), vel0, tpos0, tvel0)
        if tracking:
            agent_streams = [_RefStream(centroid0, dt) for _ in range(n)]

    u_vel_arr = np.zeros(n)
    u_h_arr = np.zeros(n)
    u_spc_arr = np.zeros(n)
    u_tot_arr = np.zeros(n)

    for m in range(steps):
        t = m * dt
        if config.target is not None:
            tgt_pos, tgt_vel = target_state(config.target, t)
        else:
            tgt_pos = tgt_vel = None

        positions = np.column_stack((x, y))
        true_snap = Snapshot(speeds=speeds, headings=th, positions=positions)
        true_centroid = true_snap.centroid()
        true_cvel = true_snap.centroid_velocity()
        stale_seen = 0

        # Observer reference (always computed from ground truth; logged).
        if tracking:
            obs_vel = reference_velocity(tgt_pos, tgt_vel, true_centroid, config.weight)
            obs_ref = obs_stream.sample(obs_vel)
        else:
            obs_ref = closed_ref.signal(t)

        if net is None:
            controls = swarm_controls(true_snap, obs_ref, gains)
            for k in range(n):
                u_vel_arr[k] = controls[k].u_velocity
                u_h_arr[k] = controls[k].h_feedforward
                u_spc_arr[k] = controls[k].u_spacing
                u_tot_arr[k] = controls[k].total
        else:
            for k in range(1, n + 1):
                snap_k = net.snapshot_for_agent(k, positions[k - 1], th[k - 1], speeds, t)
                stale_seen += int(snap_k.stale.sum())
                if tracking:
                    tp, tv, t_stale = net.target_estimate(k, t)
                    stale_seen += int(t_stale)
                    vel_k = reference_velocity(tp, tv, snap_k.centroid(), config.weight)
                    ref_k = agent_streams[k - 1].sample(vel_k)
                else:
                    ref_k = obs_ref
                ck = swarm_controls(snap_k, ref_k, gains)[k - 1]
                u_vel_arr[k - 1] = ck.u_velocity
                u_h_arr[k - 1] = ck.h_feedforward
                u_spc_arr[k - 1] = ck.u_spacing
                u_tot_arr[k - 1] = ck.total

        if config.disturbance > 0.0:
            for k in range(n):
                draw = counter_uniform(config.seed, SALT_DISTURB, m, k + 1)
                u_tot_arr[k] += config.disturbance * (2.0 * draw - 1.0)
        if gains.u_max is not None:
            for k in range(n):
                u_tot_arr[k] = saturate(u_tot_arr[k], gains.u_max)

        # Record the step (state at time t, command applied over [t, t+dt)).
        log.t[m] = t
        log.x[m] = x
        log.y[m] = y
        log.theta[m] = th
        log.u_vel[m] = u_vel_arr
        log.u_h[m] = u_h_arr
        log.u_spc[m] = u_spc_arr
        log.u_total[m] = u_tot_arr
        log.centroid[m] = true_centroid
        log.centroid_vel[m] = true_cvel
        log.ref_pos[m] = obs_ref.position
        log.ref_vel[m] = obs_ref.velocity
        if config.target is not None:
            log.target_pos[m] = tgt_pos
            log.target_vel[m] = tgt_vel
            log.beta_norm[m] = math.hypot(
                true_centroid[0] - tgt_pos[0], true_centroid[1] - tgt_pos[1]
            )
        else:
            log.target_pos[m] = (math.nan, math.nan)
            log.target_vel[m] = (math.nan, math.nan)
            log.beta_norm[m] = math.nan
        err = true_cvel - obs_ref.velocity
        log.alpha_norm[m] = math.hypot(err[0], err[1])
        log.V[m] = 0.5 * float(err @ err)
        log.dist_to_centroid[m] = np.hypot(x - true_centroid[0], y - true_centroid[1])
        if net is not None:
            log.net_sent[m] = net.stats.sent
            log.net_decisions[m] = net.stats.pair_decisions
            log.net_delivered[m] = net.stats.delivered
            log.net_dropped[m] = net.stats.dropped
            log.stale_count[m] = stale_seen

        # Integrate dynamics, then references, then move network traffic.
        x, y, th = rk4_unicycle_arrays(x, y, th, speeds, u_tot_arr, dt)
        t_next = (m + 1) * dt
        if tracking:
            obs_stream.advance(dt)
            if agent_streams is not None:
                for s in agent_streams:
                    s.advance(dt)
        if net is not None:
            if config.target is not None:
                ntp, ntv = target_state(config.target, t_next)
            else:
                ntp = ntv = None
            new_vel = np.column_stack((speeds * np.cos(th), speeds * np.sin(th)))
            net.advance(t, t_next, np.column_stack((x, y)), new_vel, ntp, ntv)

        if not (np.isfinite(x).all() and np.isfinite(y).all() and np.isfinite(th).all()):
            _truncate_log(log, m + 1)
            log.aborted = f"non-finite state after step {m} (t={t_next:.6g} s)"
            raise SimulationAborted(log.aborted, log)

    return log


# --------------------------------------------------------------------------
# Centroid oracle (heading dynamics bypassed)


def run_oracle_centroid(config: ScenarioConfig) -> RunLog:
    """Idealized outer loop: the centroid velocity equals the reference exactly.

    Isolates the target-tracking error dynamics beta = centroid - target,
    which then obey beta_dot = -w(||beta||) * beta. beta is advanced exactly
    (closed-form exponential) for a constant weight and by a classical
    4th-order step for the distance-dependent weight. Agents translate rigidly
    with the centroid; controls, V, and alpha are identically zero.
    """
    if not isinstance(config.reference_mode, TargetTracking):
        raise ValueError("the centroid oracle only makes sense for target-tracking configs")
    n, dt = config.n, config.dt
    steps = int(round(config.duration / dt))
    speeds = config.speeds
    x0 = np.array([a.position[0] for a in config.agents])
    y0 = np.array([a.position[1] for a in config.agents])
    th0 = np.array([wrap_angle(a.heading) for a in config.agents])
    centroid0 = vec2(x0.mean(), y0.mean())
    offx, offy = x0 - centroid0[0], y0 - centroid0[1]

    tpos0, _ = target_state(config.target, 0.0)
    beta = centroid0 - tpos0
    w = config.weight

    log = _alloc_log(steps, n, speeds, dt, config.seed)
    log.meta["feasibility"] = config.feasibility()

    for m in range(steps):
        t = m * dt
        tgt_pos, tgt_vel = target_state(config.target, t)
        centroid = tgt_pos + beta
        ref_vel = reference_velocity(tgt_pos, tgt_vel, centroid, w)
        log.t[m] = t
        log.x[m] = centroid[0] + offx
        log.y[m] = centroid[1] + offy
        log.theta[m] = th0
        log.centroid[m] = centroid
        log.centroid_vel[m] = ref_vel
        log.ref_pos[m] = centroid
        log.ref_vel[m] = ref_vel
        log.target_pos[m] = tgt_pos
        log.target_vel[m] = tgt_vel
        log.beta_norm[m] = math.hypot(beta[0], beta[1])
        log.dist_to_centroid[m] = np.hypot(offx, offy)

        if isinstance(w, ConstantWeight):
            beta = beta * math.exp(-w.value * dt)
        else:
            beta = _rk4_beta(beta, w, dt)
    return log


def _rk4_beta(beta: np.ndarray, w, dt: float) -> np.ndarray:
    def f(b):
        return -w(math.hypot(b[0], b[1])) * b

    k1 = f(beta)
    k2 = f(beta + 0.5 * dt * k1)
    k3 = f(beta + 0.5 * dt * k2)
    k4 = f(beta + dt * k3)
    return beta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
