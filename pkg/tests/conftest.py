import pytest
from hypothesis import settings

from plap_hartree.convolution import KernelStore
from plap_hartree.model import ProblemParams, Variant
from plap_hartree.radial import RadialGrid
from plap_hartree.solver import SolveOptions, solve_ground_state

# fixed example database-free draws: reruns see the same examples
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def kernels(tmp_path_factory):
    return KernelStore(str(tmp_path_factory.mktemp("kernels")))


@pytest.fixture(scope="session")
def grid():
    return RadialGrid(1e-4, 1e4, 2048)


@pytest.fixture(scope="session")
def talenti_solution(kernels, grid):
    params = ProblemParams(5, 2.0, 0.0, variant=Variant.HARDY_SOBOLEV)
    prof, rep = solve_ground_state(params, grid, SolveOptions(), kernels)
    return params, prof, rep


@pytest.fixture(scope="session")
def hartree_mu1(kernels, grid):
    params = ProblemParams(5, 2.0, 1.0)
    prof, rep = solve_ground_state(params, grid, SolveOptions(), kernels)
    return params, prof, rep


@pytest.fixture(scope="session")
def hartree_mu0(kernels, grid):
    params = ProblemParams(5, 2.0, 0.0)
    prof, rep = solve_ground_state(params, grid, SolveOptions(), kernels)
    return params, prof, rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
