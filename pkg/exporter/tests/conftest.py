import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# Make the analysis toolkit's source importable when running from a
# checkout (the round-trip tests drive its CLI in-process).
_TOOLKIT_SRC = Path(__file__).resolve().parents[2] / "src"
if _TOOLKIT_SRC.is_dir() and str(_TOOLKIT_SRC) not in sys.path:
    sys.path.insert(0, str(_TOOLKIT_SRC))


@pytest.fixture(scope="session")
def sample_images(tmp_path_factory):
    """Five small random-texture PNGs."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(7)
    for i in range(5):
        arr = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        Image.fromarray(arr).save(root / f"img_{i:03d}.png")
    return root
