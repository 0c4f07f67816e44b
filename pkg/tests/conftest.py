import numpy as np
import pytest

from complexca.ca import CaSpec


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


def naive_step(cells, outputs, k, radius):
    """Per-cell loop oracle for 1D or 2D toroidal stepping."""
    cells = np.asarray(cells)
    out = np.empty_like(cells)
    w = 2 * radius + 1
    if cells.ndim == 1:
        n = cells.shape[0]
        for i in range(n):
            idx = 0
            for d in range(-radius, radius + 1):
                idx = idx * k + int(cells[(i + d) % n])
            out[i] = outputs[idx]
        return out
    h, wd = cells.shape
    for i in range(h):
        for j in range(wd):
            idx = 0
            for di in range(w):
                for dj in range(w):
                    idx = idx * k + int(cells[(i + di - radius) % h, (j + dj - radius) % wd])
            out[i, j] = outputs[idx]
    return out


def spec1d(n=16, k=2, r=1):
    return CaSpec(1, k, r, (n,))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """report(n, ok, detail): log one criterion verdict for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
