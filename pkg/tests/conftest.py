import numpy as np
import pytest

from dbandit.geometry import Box, L1Ball, L2Ball

_REPORT = []


def record(line):
    """Collect a one-line verdict for the terminal summary."""
    _REPORT.append(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


def grid_projection(v, radius, h):
    """Nearest point of a uniform grid (spacing ``h``) inside the 2-d L1 ball."""
    ticks = np.arange(-radius, radius + h / 2, h)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = pts[np.abs(pts).sum(axis=1) <= radius + 1e-12]
    return pts[np.argmin(((pts - v) ** 2).sum(axis=1))]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["box", "l1", "l2"])
def any_set(request):
    return {
        "box": Box([-3.0, -1.0, 0.0], [3.0, 2.0, 0.5]),
        "l1": L1Ball(3.0, 3),
        "l2": L2Ball(2.0, 3),
    }[request.param]
