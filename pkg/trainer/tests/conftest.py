import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toy_clips import two_state_frames  # noqa: E402


@pytest.fixture
def toy_frames():
    return two_state_frames(seed=0)
