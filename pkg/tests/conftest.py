import numpy as np
import pytest

from contspec.spectral import build_grid

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["uniform-trapezoid", "gauss-legendre", "gauss-laguerre-mapped"])
def any_grid(request):
    return build_grid(request.param, 48, 20.0)


@pytest.fixture
def gl_grid():
    return build_grid("gauss-legendre", 64, 30.0)
