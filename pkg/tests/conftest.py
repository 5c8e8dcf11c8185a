import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prefelicit import (
    ItemBank,
    PreferencePolyhedron,
    UncertaintyModel,
    load_item_bank,
)

DATA_DIR = Path(__file__).parents[1] / "data"


@pytest.fixture(scope="session")
def e1_bank() -> ItemBank:
    return load_item_bank((DATA_DIR / "e1.csv").read_text())


@pytest.fixture(scope="session")
def simplex2() -> PreferencePolyhedron:
    return PreferencePolyhedron.simplex(2)


@pytest.fixture()
def e1_model(simplex2) -> UncertaintyModel:
    return UncertaintyModel(simplex2)


def make_bank(items: np.ndarray) -> ItemBank:
    ids = tuple(f"item{i + 1}" for i in range(items.shape[0]))
    n = items.shape[0]
    return ItemBank(items, ids, frozenset(range(1, n + 1)),
                    frozenset(range(1, n + 1)))


def box_model(dim: int, gamma: float = 0.0) -> UncertaintyModel:
    return UncertaintyModel(PreferencePolyhedron.box(dim), gamma=gamma)
