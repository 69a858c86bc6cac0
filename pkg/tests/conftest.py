import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stepmaximin import ModelSpec, solve_stepdown, solve_stepup


@pytest.fixture(scope="session")
def uniform4():
    return ModelSpec.iid_uniform_null(4)


@pytest.fixture(scope="session")
def normal5():
    return ModelSpec.iid_normal(5)


@pytest.fixture(scope="session")
def normal5_ladders(normal5):
    """(stepdown, stepup) ladders at alpha = 0.05, solved once per session."""
    return solve_stepdown(normal5, 0.05), solve_stepup(normal5, 0.05)
