from wae.simulator.cost import compute_cost, cost_reduction
from wae.simulator.engine import SimulatedPoP, emit_telemetry, run_scenario, run_topologies
from wae.simulator.queues import QueueState, route, step_queues
from wae.simulator.workload import WorkloadStream, active_users, generate_workload

__all__ = [
    "QueueState",
    "SimulatedPoP",
    "WorkloadStream",
    "active_users",
    "compute_cost",
    "cost_reduction",
    "emit_telemetry",
    "generate_workload",
    "route",
    "run_scenario",
    "run_topologies",
    "step_queues",
]
