import numpy as np
from hypothesis import strategies as st

from splinequad.splines import Partition, SplineSpace


def random_partition(rng: np.random.Generator, ne: int) -> Partition:
    gaps = rng.uniform(0.2, 1.0, ne)
    knots = np.concatenate([[0.0], np.cumsum(gaps) / gaps.sum()])
    knots[-1] = 1.0
    return Partition(tuple(knots))


@st.composite
def spaces(draw, max_degree=8, max_elements=12, uniform=None):
    d = draw(st.integers(1, max_degree))
    k = draw(st.integers(0, d - 1))
    ne = draw(st.integers(1, max_elements))
    is_uniform = draw(st.booleans()) if uniform is None else uniform
    if is_uniform:
        partition = Partition.uniform(ne)
    else:
        seed = draw(st.integers(0, 2**31 - 1))
        partition = random_partition(np.random.default_rng(seed), ne)
    return SplineSpace(d, k, partition)


# one line per acceptance criterion, echoed at the end of the pytest run
ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
