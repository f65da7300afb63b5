import numpy as np
import pytest

from pathint import TimeGrid, gen_brownian, gen_deterministic

GAMMAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def rel_tol(*arrays) -> float:
    """1e-12 times the magnitude of the operands (at least 1)."""
    return 1e-12 * max(1.0, *(float(np.max(np.abs(a))) for a in arrays))


@pytest.fixture(scope="session")
def grid12():
    return TimeGrid.uniform(1.0, 2**12 + 1)


@pytest.fixture(scope="session")
def fixtures12(grid12):
    """Brownian seeds 1-5 (d=2), circle, zigzag and linear paths on 2^12 cells."""
    paths = {f"bm{s}": gen_brownian(grid12, 2, seed=s) for s in range(1, 6)}
    paths["circle"] = gen_deterministic("circle", grid12)
    paths["zigzag"] = gen_deterministic("zigzag", grid12, dim=2, m=8)
    paths["linear"] = gen_deterministic("linear", grid12, dim=2)
    return paths


ACCEPTANCE_LINES: dict[int, str] = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
