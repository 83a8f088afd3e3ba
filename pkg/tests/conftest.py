import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pearlkit import _edt  # noqa: E402
from pearlkit.geometry import BinaryMask  # noqa: E402

import oracles  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session", autouse=True)
def jit_warmup():
    """Compile the numba kernels before any timed test runs."""
    _edt.warmup()
    oracles.brute_force_squared_edt(np.array([[True, False], [False, False]]))


@pytest.fixture()
def m5() -> BinaryMask:
    """5x5 mask with the 3x3 center block set."""
    bits = np.zeros((5, 5), dtype=bool)
    bits[1:4, 1:4] = True
    return BinaryMask(bits)


def random_mask(rng: np.random.Generator, width: int, height: int, density: float) -> BinaryMask:
    """Random mask guaranteed to contain both classes."""
    bits = rng.random((height, width)) < density
    if bits.all():
        bits[rng.integers(0, height), rng.integers(0, width)] = False
    if not bits.any():
        bits[rng.integers(0, height), rng.integers(0, width)] = True
    return BinaryMask(bits)


@pytest.fixture()
def data_dir() -> Path:
    return DATA_DIR
