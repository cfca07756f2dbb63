import numpy as np
import pytest

from hierdti import nd

# lines collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to array ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def tape_grads(build, params):
    """Run ``build()`` (returns a scalar Tensor) under a tape; return grads of ``params``."""
    for p in params:
        p.grad = None
    with nd.Tape() as tape:
        out = build()
        nd.backward(out, tape)
    return [p.grad if p.grad is not None else np.zeros(p.shape) for p in params]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
