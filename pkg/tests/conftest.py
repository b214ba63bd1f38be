import sys

import numpy as np
import pytest

from chdyn.mesh import assemble_operators, build_strip_mesh
from chdyn.spectral import eigendecompose


@pytest.fixture(scope="session")
def desk_ops():
    return assemble_operators(build_strip_mesh(32, 33, 2 * np.pi, 1.0))


@pytest.fixture(scope="session")
def desk_basis(desk_ops):
    return eigendecompose(desk_ops, 64)


@pytest.fixture(scope="session")
def small_ops():
    return assemble_operators(build_strip_mesh(8, 5, 2 * np.pi, 1.0))


@pytest.fixture(scope="session")
def small_basis(small_ops):
    # the full basis: every nodal field is representable
    return eigendecompose(small_ops, small_ops.mesh.size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
