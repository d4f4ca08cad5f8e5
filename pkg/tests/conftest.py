import os
from pathlib import Path

import pytest

from src.dataset import SplitSpec, prepare
from src.synthetic import planted_interactions

ML100K_DEFAULT = Path("data/ml-100k/u.data")


@pytest.fixture
def toy_dataset():
    frame = planted_interactions(n_users=30, n_items=40, k=3, items_per_user=12, seed=7)
    ds, _ = prepare(frame, SplitSpec(min_ratings_per_user=5), seed=0)
    return ds


@pytest.fixture
def toy_log(tmp_path):
    path = tmp_path / "u.data"
    lines = []
    for user in range(4):
        for item in range(8):
            rating = 5 if (user + item) % 3 == 0 else 2
            lines.append(f"{user}\t{item}\t{rating}\t{1000 + 10 * item + user}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def ml100k_path():
    path = Path(os.environ.get("RECNET_ML100K", ML100K_DEFAULT))
    if not path.is_file():
        pytest.skip("ML-100K u.data not available")
    return path
