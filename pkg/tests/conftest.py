import numpy as np
import pytest

from ccx.grid import GridSpec, ScalarGrid


def random_lipschitz_grid(seed: int, dim: int | None = None) -> ScalarGrid:
    """Bounded-slope random grid: a random walk in 1D, a sum of random cones and ridges in 2D."""
    rng = np.random.default_rng(seed)
    if dim is None:
        dim = 1 + seed % 2
    if dim == 1:
        n = int(rng.integers(60, 200))
        h = 1.0 / n
        steps = rng.uniform(-1.0, 1.0, n) * rng.uniform(0.5, 3.0) * h
        values = np.concatenate([[0.0], np.cumsum(steps)])
        return ScalarGrid(values, (float(rng.uniform(-1, 1)),), (h,))
    n = int(rng.integers(20, 36))
    h = 1.0 / n
    spec = GridSpec((n, n + 3), (float(rng.uniform(-1, 1)), 0.0), (h, h))
    x = spec.node_coords()
    values = np.zeros(spec.dims)
    for _ in range(int(rng.integers(2, 6))):
        a = rng.normal(size=2)
        b = rng.uniform(0.0, 1.0, size=2)
        c = rng.uniform(-2.0, 2.0)
        if rng.random() < 0.5:
            values += c * np.linalg.norm(x - b, axis=-1)
        else:
            values += c * np.abs((x - b) @ a)
    return ScalarGrid(values, spec.origin, spec.spacing)


@pytest.fixture
def lipschitz_grids():
    return [random_lipschitz_grid(s) for s in range(100)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
