import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stochsym import io  # noqa: E402
from stochsym.cli import fixture_path  # noqa: E402


@pytest.fixture(scope="session")
def ex51():
    return io.load(fixture_path("ex51"))


@pytest.fixture(scope="session")
def bm2d():
    return io.load(fixture_path("bm2d"))
