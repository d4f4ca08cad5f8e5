'''
Interaction logs drawn from a known bilinear preference model, for checking
that training recovers an ordering that is actually there.
'''
import numpy as np
import pandas as pd

from src.utils.exceptions import ArgumentError
from src.utils.logger import Logger

logger = Logger("[synthetic]")

PREFERRED_RATING = 5.0
OTHER_RATING = 1.0


def planted_interactions(n_users, n_items, k, items_per_user, seed=0, return_truth=False):
    """
    Every user is shown `items_per_user` distinct random items. An item is
    preferred (rating 5) when its true score U*_u . V*_i is in the upper half
    of the user's shown items, otherwise rated 1. Timestamps are a random
    permutation, so the temporal split is a random one.
    """
    if min(n_users, n_items, k) < 1:
        raise ArgumentError("n_users, n_items and k must be >= 1")
    if not 2 <= items_per_user <= n_items:
        raise ArgumentError(f"items_per_user must be in [2, {n_items}], got {items_per_user}")

    rng = np.random.default_rng(seed)
    true_users = rng.normal(size=(n_users, k))
    true_items = rng.normal(size=(n_items, k))

    shown = np.stack([rng.choice(n_items, size=items_per_user, replace=False) for _ in range(n_users)])
    scores = np.einsum("uk,usk->us", true_users, true_items[shown])
    order = np.argsort(-scores, axis=1, kind="stable")
    preferred = np.zeros_like(shown, dtype=bool)
    np.put_along_axis(preferred, order[:, :items_per_user // 2], True, axis=1)

    n_rows = n_users * items_per_user
    frame = pd.DataFrame({
        "user_id": [f"u{u}" for u in np.repeat(np.arange(n_users), items_per_user)],
        "item_id": [f"i{i}" for i in shown.ravel()],
        "rating": np.where(preferred.ravel(), PREFERRED_RATING, OTHER_RATING),
        "timestamp": rng.permutation(n_rows).astype(np.int64),
    })
    logger.info(f"Planted {n_rows} interactions for {n_users} users over {n_items} items (k={k})")
    if return_truth:
        return frame, (true_users, true_items)
    return frame
