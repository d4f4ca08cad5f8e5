import numpy as np
import pytest

from consts import Scorer
from src.ranker import (
    RankedList,
    insertion_order,
    rank_users,
    sort_order,
    topk_insertion,
    topk_sort,
    write_rankings,
)
from src.utils.exceptions import ArgumentError, IndexRangeError
from tests.helpers import random_params


class TestOrders:

    def test_example(self):
        assert insertion_order([0.9, 0.1, 0.5], 2) == [0, 2]
        assert sort_order([0.9, 0.1, 0.5], 2).tolist() == [0, 2]

    def test_single_candidate(self):
        assert insertion_order([0.3], 5) == [0]
        assert sort_order([0.3], 5).tolist() == [0]

    def test_k_larger_than_candidates(self):
        assert insertion_order([0.1, 0.4, 0.2], 10) == [1, 2, 0]

    def test_ties_keep_first_seen(self):
        assert insertion_order([1.0, 1.0, 2.0, 1.0], 4) == [2, 0, 1, 3]
        assert sort_order([1.0, 1.0, 2.0, 1.0], 4).tolist() == [2, 0, 1, 3]

    def test_invalid_requests(self):
        with pytest.raises(ArgumentError):
            insertion_order([0.1, 0.2], 0)
        with pytest.raises(ArgumentError):
            sort_order([], 3)

    def test_insertion_agrees_with_sort(self):
        rng = np.random.default_rng(17)
        for trial in range(1000):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(1, 45))
            if trial % 2:
                scores = rng.integers(0, 4, size=n).astype(float)
            else:
                scores = rng.normal(size=n)
            assert insertion_order(scores, k) == sort_order(scores, k).tolist(), (scores, k)


class TestTopK:

    def test_sort_ignores_candidate_order(self):
        params = random_params(5, 60, seed=8)
        params.scorer = Scorer.DOT
        rng = np.random.default_rng(2)
        candidates = rng.choice(60, size=25, replace=False)
        expected = topk_sort(params, 3, candidates, 10)
        for _ in range(50):
            shuffled = rng.permutation(candidates)
            ranked = topk_sort(params, 3, shuffled, 10)
            np.testing.assert_array_equal(ranked.items, expected.items)
            np.testing.assert_array_equal(ranked.scores, expected.scores)

    def test_both_rankers_agree(self):
        params = random_params(5, 30, seed=3)
        candidates = [29, 3, 17, 8, 0, 12, 21]
        by_sort = topk_sort(params, 2, candidates, 4)
        by_insertion = topk_insertion(params, 2, candidates, 4)
        np.testing.assert_array_equal(by_sort.items, by_insertion.items)
        assert len(by_sort) == 4
        assert (np.diff(by_sort.scores) <= 0).all()
        assert set(by_sort.items) <= set(candidates)

    def test_constant_scores_keep_candidate_order(self):
        params = random_params(2, 6, seed=0)
        params.w2[:] = 0.0
        assert topk_insertion(params, 0, [4, 1, 5, 2], 3).items.tolist() == [4, 1, 5]

    def test_unknown_user(self):
        with pytest.raises(IndexRangeError):
            topk_sort(random_params(2, 3), 7, [0, 1], 1)

    def test_empty_candidates(self):
        with pytest.raises(ArgumentError):
            topk_insertion(random_params(2, 3), 0, [], 1)


class TestRankUsers:

    def test_threads_do_not_change_results(self):
        params = random_params(6, 20, seed=5)
        candidates = {u: np.arange(u, u + 10) for u in (5, 0, 3)}
        single = rank_users(params, candidates, 3, method="insertion", threads=1)
        pooled = rank_users(params, candidates, 3, method="insertion", threads=4)
        assert [ranked.user for ranked in single] == [0, 3, 5]
        for a, b in zip(single, pooled):
            assert a.user == b.user
            np.testing.assert_array_equal(a.items, b.items)

    def test_write_rankings(self, tmp_path):
        lists = [RankedList(user=1, items=np.array([2, 0]), scores=np.array([0.5, 0.25]))]
        write_rankings(lists, tmp_path / "rankings.tsv", user_ids=np.array(["u0", "u1"], dtype=object),
                       item_ids=np.array(["a", "b", "c"], dtype=object))
        assert (tmp_path / "rankings.tsv").read_text() == "u1\t1\tc\t0.5\nu1\t2\ta\t0.25\n"
