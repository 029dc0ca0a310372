"""Deployment cost: physical machines times unit machine cost."""
from __future__ import annotations

from core.loader import ScenarioConfig
from wae.domain import Topology
from wae.reports import CostSummary


def machine_count(topology: Topology, config: ScenarioConfig) -> int:
    if topology is Topology.BARE_METAL:
        # one dedicated server per role of the traditional PoP, plus the extras
        return len(config.cost.traditional_roles) + config.cost.traditional_extra_machines
    return config.machines.count


def compute_cost(topology: Topology, config: ScenarioConfig) -> CostSummary:
    machines = machine_count(topology, config)
    unit = config.cost.unit_machine_cost
    return CostSummary(machines=machines, unit_machine_cost=unit, total=machines * unit)


def cost_reduction(traditional_machines: int, containerized_machines: int) -> float:
    """Percent saved by the containerized PoP; 0 when the counts are equal."""
    if traditional_machines <= 0:
        return 0.0
    return 100.0 * (traditional_machines - containerized_machines) / traditional_machines
