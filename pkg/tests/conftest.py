import numpy as np
import pytest

from slackreclaim.powermodel import preset
from slackreclaim.settings import settings
from slackreclaim.taskgraph import Edge, Task, TaskGraph


@pytest.fixture
def transmeta():
    return preset("transmeta_crusoe")


@pytest.fixture
def xscale():
    return preset("intel_xscale")


@pytest.fixture(params=["transmeta_crusoe", "intel_xscale"])
def any_cpu(request):
    return preset(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def diamond():
    """0 -> {1, 2} -> 3 with uneven branches so the short branch has slack."""
    return TaskGraph(
        tasks=(
            Task(id=0, cycles=667.0),
            Task(id=1, cycles=2668.0),
            Task(id=2, cycles=1334.0),
            Task(id=3, cycles=667.0),
        ),
        edges=(
            Edge(src=0, dst=1, comm=0.5),
            Edge(src=0, dst=2, comm=0.5),
            Edge(src=1, dst=3, comm=0.5),
            Edge(src=2, dst=3, comm=0.5),
        ),
        label="diamond",
    )


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Environment overrides set by one test must not leak through the settings cache."""
    settings.clear()
    yield
    settings.clear()
