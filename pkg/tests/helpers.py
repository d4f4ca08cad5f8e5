import numpy as np
import pandas as pd

from src.model import ModelConfig, init


def make_frame(rows):
    """rows of (user, item, rating, timestamp)"""
    users, items, ratings, stamps = zip(*rows)
    return pd.DataFrame({
        "user_id": [str(u) for u in users],
        "item_id": [str(i) for i in items],
        "rating": np.asarray(ratings, dtype=np.float64),
        "timestamp": np.asarray(stamps, dtype=np.int64),
    })


def random_params(n_users, n_items, k=3, hidden=8, seed=0, init_scale=None):
    return init(ModelConfig(embed_dim=k, hidden_units=hidden, init_scale=init_scale, seed=seed), n_users, n_items)
