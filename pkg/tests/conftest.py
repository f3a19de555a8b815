import numpy as np
import pytest

from cedl.encoder import LayerSpec, forward, init_encoder
from cedl.numerics import finite_difference_gradient

ACTS = ("relu", "leaky_relu", "tanh", "identity")


def random_model(rng, max_width=16, max_depth=4, output="tanh"):
    """Random chain of <= max_depth layers with random activations and biases."""
    depth = int(rng.integers(1, max_depth + 1))
    widths = rng.integers(1, max_width + 1, size=depth + 1)
    specs = [
        LayerSpec(int(widths[k]), int(widths[k + 1]),
                  output if k == depth - 1 else ACTS[int(rng.integers(len(ACTS)))])
        for k in range(depth)
    ]
    model = init_encoder(specs, int(rng.integers(1 << 30)))
    params = [p + 0.1 * rng.standard_normal(p.shape) if i % 2 else p
              for i, p in enumerate(model.parameters())]
    return model.with_parameters(params)


def fd_param_grads(model, X, scalar_of_R, h=1e-5):
    """Central-difference gradient of ``scalar_of_R(forward(model, X))`` per parameter."""
    params = model.parameters()
    out = []
    for i, p in enumerate(params):
        def f(v, i=i):
            ps = list(params)
            ps[i] = v
            return scalar_of_R(forward(model.with_parameters(ps), X)[0])
        out.append(finite_difference_gradient(f, p, h))
    return out


def tensor_rel_err(a, n):
    """``||a - n|| / max(||a||, ||n||)`` (0 when both vanish)."""
    den = max(np.linalg.norm(a), np.linalg.norm(n))
    return 0.0 if den == 0 else float(np.linalg.norm(a - n) / den)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_GATE = []


@pytest.fixture
def gate():
    """Record one acceptance line: ``gate(number, passed, detail)``."""
    def record(number, passed, detail):
        status = "PASS" if passed else "FAIL" if passed is not None else "SKIP"
        line = f"criterion {number}: {status}  {detail}"
        _GATE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _GATE:
        terminalreporter.section("acceptance gate")
        for line in sorted(_GATE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
