'''
Top-k inference for one user.

Both rankers order candidates by the model score descending: g(Phi(u, i)),
or U_u . V_i for a dot-scored model. A candidate only displaces a listed
item when its score is strictly greater, so equal scores keep the order in
which candidates were seen.
'''
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from src.model import ModelParams, score_items
from src.utils.exceptions import ArgumentError
from src.utils.logger import Logger

logger = Logger("[ranker]")


@dataclass(frozen=True)
class RankedList:
    user: int
    items: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.items)


def _check_request(candidates, k):
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if len(candidates) == 0:
        raise ArgumentError("no candidates to rank")


def insertion_order(scores, k) -> List[int]:
    """
    Positions of the k best scores, built by insertion.
    The list starts from the preferred of the first two candidates; every
    next candidate walks the list top-down and goes in front of the first
    entry it strictly beats.
    """
    _check_request(scores, k)
    scores = np.asarray(scores, dtype=np.float64)

    if len(scores) == 1:
        return [0]
    ranked = [1, 0] if scores[1] > scores[0] else [0, 1]
    del ranked[k:]

    for position in range(2, len(scores)):
        value = scores[position]
        if len(ranked) == k and not value > scores[ranked[-1]]:
            continue
        rank = len(ranked)
        for j, listed in enumerate(ranked):
            if value > scores[listed]:
                rank = j
                break
        ranked.insert(rank, position)
        del ranked[k:]
    return ranked


def sort_order(scores, k) -> np.ndarray:
    _check_request(scores, k)
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")[:k]


def topk_insertion(params: ModelParams, u, candidates: Sequence[int], k) -> RankedList:
    _check_request(candidates, k)
    candidates = np.asarray(candidates, dtype=np.int64)
    scores = score_items(params, u, candidates)
    order = np.asarray(insertion_order(scores, k), dtype=np.int64)
    return RankedList(user=int(u), items=candidates[order], scores=scores[order])


def topk_sort(params: ModelParams, u, candidates: Sequence[int], k) -> RankedList:
    _check_request(candidates, k)
    candidates = np.asarray(candidates, dtype=np.int64)
    scores = score_items(params, u, candidates)
    order = sort_order(scores, k)
    return RankedList(user=int(u), items=candidates[order], scores=scores[order])


def rank_users(params: ModelParams, candidates: Dict[int, np.ndarray], k, method="sort", threads=1):
    """One RankedList per user in ascending user order."""
    ranker = topk_insertion if method == "insertion" else topk_sort
    users = sorted(candidates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda u: ranker(params, u, candidates[u], k), users))
    return [ranker(params, u, candidates[u], k) for u in users]


def write_rankings(lists: Sequence[RankedList], path, user_ids=None, item_ids=None):
    """`user \\t rank \\t item \\t score`, ranks from 1, one block per user."""
    blocks = []
    for ranked in lists:
        blocks.append(pd.DataFrame({
            "user": ranked.user if user_ids is None else user_ids[ranked.user],
            "rank": np.arange(1, len(ranked) + 1),
            "item": ranked.items if item_ids is None else item_ids[ranked.items],
            "score": [repr(float(score)) for score in ranked.scores],
        }))
    frame = pd.concat(blocks) if blocks else pd.DataFrame(columns=["user", "rank", "item", "score"])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", header=False, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(lists)} ranked lists to {path}")
