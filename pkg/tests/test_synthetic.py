import numpy as np
import pandas as pd
import pytest

from consts import Variant
from src.dataset import SplitSpec, prepare
from src.metrics import pairwise_accuracy
from src.model import ModelConfig
from src.objective import ObjectiveSpec
from src.synthetic import planted_interactions
from src.trainer import TrainConfig, train
from src.utils.exceptions import ArgumentError


class TestPlantedInteractions:

    def test_shape(self):
        frame = planted_interactions(n_users=10, n_items=30, k=3, items_per_user=8, seed=1)
        assert len(frame) == 80
        assert list(frame.columns) == ["user_id", "item_id", "rating", "timestamp"]
        assert frame.groupby("user_id")["item_id"].nunique().eq(8).all()
        assert sorted(frame["timestamp"]) == list(range(80))

    def test_upper_half_is_preferred(self):
        frame, (true_users, true_items) = planted_interactions(
            n_users=12, n_items=25, k=4, items_per_user=10, seed=2, return_truth=True)
        assert frame.groupby("user_id")["rating"].apply(lambda r: (r == 5.0).sum()).eq(5).all()
        for user_id, rows in frame.groupby("user_id"):
            u = int(user_id[1:])
            items = rows["item_id"].str[1:].astype(int).to_numpy()
            scores = true_items[items] @ true_users[u]
            preferred = rows["rating"].to_numpy() == 5.0
            assert scores[preferred].min() >= scores[~preferred].max()

    def test_seeded(self):
        pd.testing.assert_frame_equal(planted_interactions(5, 20, 2, 6, seed=9), planted_interactions(5, 20, 2, 6, seed=9))

    def test_invalid(self):
        with pytest.raises(ArgumentError):
            planted_interactions(5, 4, 2, 6)
        with pytest.raises(ArgumentError):
            planted_interactions(0, 4, 2, 2)


def _recovered_accuracy(n_users, n_items, k, items_per_user, variant, epochs, batch_size, learning_rate,
                        lam=1e-4):
    frame = planted_interactions(n_users, n_items, k, items_per_user, seed=11)
    ds, _ = prepare(frame, SplitSpec(min_ratings_per_user=5), seed=0)
    params, _ = train(
        ds,
        ModelConfig(embed_dim=k, hidden_units=32, seed=1),
        ObjectiveSpec(variant=variant, alpha=0.5, lam=lam),
        TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=learning_rate, seed=2),
    )
    return pairwise_accuracy(params, ds)


class TestPlantedRecovery:

    @pytest.mark.parametrize("variant", [Variant.C, Variant.P, Variant.CP])
    def test_small_problem(self, variant):
        accuracy = _recovered_accuracy(60, 80, 4, 40, variant, epochs=600, batch_size=128, learning_rate=2e-2)
        assert accuracy > 0.7

    @pytest.mark.slow
    def test_full_problem(self):
        accuracy = _recovered_accuracy(200, 500, 8, 150, Variant.CP, epochs=8000, batch_size=512,
                                       learning_rate=3e-3, lam=1e-3)
        assert accuracy > 0.95
