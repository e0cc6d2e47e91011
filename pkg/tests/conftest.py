import numpy as np
import pytest
from hypothesis import strategies as st

from edgeoffload.env_model import EdgeFlow, EnvironmentSpec, Task, Workflow, load_preset

ACCEPTANCE_LINES = []


@pytest.fixture
def ref_env():
    return load_preset("reference")


@pytest.fixture
def record_criterion():
    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}"
        if detail:
            line += f" -- {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_env(rng: np.random.Generator, delta=None) -> EnvironmentSpec:
    return EnvironmentSpec(
        c_local=rng.uniform(5, 100), c_edge=rng.uniform(20, 200), c_cloud=rng.uniform(50, 400),
        b_device_edge=rng.uniform(1, 1000), b_edge_cloud=rng.uniform(1, 500), b_device_cloud=rng.uniform(1, 100),
        d_local=rng.uniform(0.01, 1), d_edge=rng.uniform(0.01, 1), d_cloud=rng.uniform(0.01, 1),
        alpha=rng.uniform(0, 2), beta=rng.uniform(0, 2),
        delta=rng.uniform(0, 3) if delta is None else delta,
    )


def random_workflow(rng: np.random.Generator, n: int) -> Workflow:
    tasks = [Task(rng.uniform(1, 1e4), rng.uniform(1, 100)) for _ in range(n)]
    flows = [EdgeFlow(rng.uniform(0, 100)) for _ in range(n - 1)]
    return Workflow(tasks, flows)


positive = st.floats(min_value=0.1, max_value=1e4, allow_nan=False, allow_infinity=False)

envs = st.builds(
    EnvironmentSpec,
    c_local=positive, c_edge=positive, c_cloud=positive,
    b_device_edge=positive, b_edge_cloud=positive, b_device_cloud=positive,
    d_local=positive, d_edge=positive, d_cloud=positive,
    alpha=st.floats(0, 5), beta=st.floats(0, 5), delta=st.floats(0, 5),
)


@st.composite
def workflows(draw, max_tasks=6):
    n = draw(st.integers(1, max_tasks))
    tasks = [Task(draw(positive), draw(positive)) for _ in range(n)]
    flows = [EdgeFlow(draw(st.floats(0, 1e3))) for _ in range(n - 1)]
    return Workflow(tasks, flows)
