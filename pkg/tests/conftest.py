import numpy as np
import pytest

from quantlsh.evaluation import make_synthetic
from quantlsh.projections import normalize


@pytest.fixture(scope="session")
def small_data():
    return make_synthetic(600, 16, 12, 0.5, seed=3, num_queries=40)


def unit_pair(rho: float, dim: int = 4):
    """Two unit vectors with dot product exactly ``rho`` (up to rounding)."""
    u = np.zeros(dim)
    u[0] = 1.0
    v = np.zeros(dim)
    v[0], v[1] = rho, np.sqrt(1.0 - rho * rho)
    return normalize(u, id=0), normalize(v, id=1)


_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion and assert it."""

    def check(name: str, ok: bool, detail: str) -> None:
        _CRITERIA[name] = (bool(ok), detail)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split()[1])):
        ok, detail = _CRITERIA[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
