import numpy as np
import pytest

from mbsvrn.dataset import Dataset, SyntheticSpec, generate_synthetic
from mbsvrn.objective import Objective


def random_dataset(n, d, seed=0, scale=1.0, name="random"):
    rng = np.random.default_rng(seed)
    X = scale * rng.standard_normal((n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return Dataset(X, y, name)


@pytest.fixture
def small_obj():
    return Objective(random_dataset(60, 5, seed=3), mu=0.1)


@pytest.fixture(scope="session")
def synthetic_small():
    return generate_synthetic(SyntheticSpec(n=400, d=6, kappa=20.0, seed=7))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record_acceptance(criterion, passed, detail):
    line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
