import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from resest.model import reference_system  # noqa: E402


@pytest.fixture
def plant():
    return reference_system(100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
