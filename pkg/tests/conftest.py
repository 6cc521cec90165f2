import math
import re

import numpy as np
import pytest

from dendrite import BC, Grid, Params

TWO_PI = 2 * math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid64():
    return Grid((64, 64), (TWO_PI, TWO_PI))


@pytest.fixture
def grid3d():
    return Grid((16, 16, 16), (TWO_PI,) * 3)


@pytest.fixture
def noflux_grid():
    return Grid((32, 24), (TWO_PI, 3.0), (BC.PERIODIC, BC.NOFLUX))


@pytest.fixture
def params():
    return Params()


def smooth_random(grid, rng, modes=4, amplitude=1.0):
    """Random band-limited field built from the lowest ``modes`` Fourier modes."""
    f = np.zeros(grid.shape)
    coords = [grid.coords(a) for a in range(grid.dims)]
    for _ in range(modes * 3):
        k = rng.integers(0, modes + 1, size=grid.dims)
        phase = rng.uniform(0, TWO_PI, size=grid.dims)
        term = amplitude * rng.normal() / (1 + k.sum())
        for a in range(grid.dims):
            scale = TWO_PI / grid.length[a] if grid.bc[a] is BC.PERIODIC else math.pi / grid.length[a]
            if grid.bc[a] is BC.NOFLUX:
                term = term * np.cos(k[a] * scale * coords[a])
            else:
                term = term * np.cos(k[a] * scale * coords[a] + phase[a])
        f = f + term
    return f


def tanh_circle(grid, r0=1.5, eps0=0.072, center=None):
    center = center or (math.pi,) * grid.dims
    r2 = sum((grid.coords(a) - c) ** 2 for a, c in enumerate(center))
    return np.broadcast_to(np.tanh((r0 - np.sqrt(r2)) / eps0), grid.shape).copy()


# acceptance lines collected by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)


def _criterion_key(line):
    label = line.split()[1].rstrip(":")
    digits = re.match(r"\d+", label).group()
    return int(digits), label[len(digits):]
