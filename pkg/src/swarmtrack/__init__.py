"""Constant-speed swarm tracking: dynamics, controllers, analysis, simulation.

A group of fixed-speed planar vehicles steers by heading control alone so that
their centroid follows a generated reference trajectory toward a moving
target, while a spacing term spreads the vehicles out around it. The package
provides the vehicle model, the control laws, equilibrium and feasibility
analysis, a broadcast network model, a simulation engine, and a scenario-file
CLI.
"""

from .analysis import (
    EquilibriumClass,
    EquilibriumRejected,
    EquilibriumSpec,
    FeasibilityReport,
    StabilityVerdict,
    build_equilibrium,
    check_feasibility,
    classify_equilibrium,
    hessian,
    lyapunov_V,
    order_parameter,
    perturbation_oracle,
    simulate_phase_flow,
    tracking_metrics,
)
from .controllers import (
    ControlInput,
    ControllerGains,
    FeedforwardSolution,
    SpacingMode,
    build_A,
    combined_control,
    project_spacing_to_kernel,
    saturate,
    solve_feedforward,
    swarm_controls,
    u_spacing_beacon,
    u_velocity,
)
from .dynamics import (
    Snapshot,
    SwarmState,
    VehicleState,
    centroid,
    centroid_velocity,
    heading_vector,
    rk4_unicycle_arrays,
    step,
    wrap_angle,
    wrap_angles,
)
from .engine import (
    AgentInit,
    ConstantRef,
    InfeasibleScenario,
    RunLog,
    ScenarioConfig,
    SimulationAborted,
    TargetTracking,
    TurningRef,
    run,
    run_oracle_centroid,
)
from .netsim import (
    BroadcastMessage,
    BroadcastNetwork,
    NeighborTable,
    NetworkConfig,
    counter_uniform,
    schedule_broadcasts,
)
from .reference import (
    ConstantVelocityTarget,
    ConstantWeight,
    DistanceDependentWeight,
    ReferenceDifferentiator,
    ReferenceSignal,
    TurningTarget,
    WaypointTarget,
    reference_velocity,
    target_state,
)
from .scenario import ScenarioError, parse_scenario, parse_scenario_text

__version__ = "0.1.0"

__all__ = [
    "AgentInit",
    "BroadcastMessage",
    "BroadcastNetwork",
    "ConstantRef",
    "ConstantVelocityTarget",
    "ConstantWeight",
    "ControlInput",
    "ControllerGains",
    "DistanceDependentWeight",
    "EquilibriumClass",
    "EquilibriumRejected",
    "EquilibriumSpec",
    "FeasibilityReport",
    "FeedforwardSolution",
    "InfeasibleScenario",
    "NeighborTable",
    "NetworkConfig",
    "ReferenceDifferentiator",
    "ReferenceSignal",
    "RunLog",
    "ScenarioConfig",
    "ScenarioError",
    "SimulationAborted",
    "Snapshot",
    "SpacingMode",
    "StabilityVerdict",
    "SwarmState",
    "TargetTracking",
    "TurningRef",
    "TurningTarget",
    "VehicleState",
    "WaypointTarget",
    "build_A",
    "build_equilibrium",
    "centroid",
    "centroid_velocity",
    "check_feasibility",
    "classify_equilibrium",
    "combined_control",
    "counter_uniform",
    "heading_vector",
    "hessian",
    "lyapunov_V",
    "order_parameter",
    "parse_scenario",
    "parse_scenario_text",
    "perturbation_oracle",
    "project_spacing_to_kernel",
    "reference_velocity",
    "rk4_unicycle_arrays",
    "run",
    "run_oracle_centroid",
    "saturate",
    "schedule_broadcasts",
    "simulate_phase_flow",
    "solve_feedforward",
    "step",
    "swarm_controls",
    "target_state",
    "tracking_metrics",
    "u_spacing_beacon",
    "u_velocity",
    "wrap_angle",
    "wrap_angles",
]
