import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from stt.schemas.params import SttParams
from stt.services.geometry import transition


@pytest.fixture
def model():
    return transition(0.1)


@pytest.fixture
def params() -> SttParams:
    return SttParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
