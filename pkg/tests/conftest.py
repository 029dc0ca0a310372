import os
import tempfile

import pytest

# core.logger opens its log file on import
os.environ.setdefault("WAE_LOG_DIR", tempfile.mkdtemp(prefix="wae-logs-"))

from core.loader import DEFAULT_SCENARIO_PATH, load_scenario, parse_scenario  # noqa: E402
from wae.domain import AssignmentMatrix, RequestVector, telemetry_from_vectors, validate_snapshot  # noqa: E402

# utilisation rows of the three physical machines in the evaluation PoP
EVAL_CPU = [0.32, 0.28, 0.25]
EVAL_NET = [0.48, 0.42, 0.51]
EVAL_REQUESTS = [5000, 1500, 500, 0]


def make_snapshot(cpu, net, requests, assignment, period_id=0):
    return validate_snapshot(
        telemetry_from_vectors(cpu, net, period_id),
        RequestVector(tuple(requests)),
        AssignmentMatrix(assignment),
    )


def scenario(**sections):
    """A scenario config built from keyword sections on top of the defaults."""
    data = {"name": "test", "service": {"snapshot_path": None}}
    data.update(sections)
    return parse_scenario(data)


@pytest.fixture
def evaluation_snapshot():
    return make_snapshot(EVAL_CPU, EVAL_NET, EVAL_REQUESTS, AssignmentMatrix.round_robin(3).to_lists())


@pytest.fixture(scope="session")
def evaluation_config():
    return load_scenario(DEFAULT_SCENARIO_PATH, env=False)
