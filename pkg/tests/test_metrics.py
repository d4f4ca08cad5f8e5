from itertools import combinations, product

import numpy as np
import pytest

from consts import Scorer, Setting
from src.dataset import Dataset, Interactions
from src.metrics import (
    PER_USER_FILE,
    ap_at,
    compare_reports,
    evaluate,
    pairwise_accuracy,
    read_per_user_ap,
    wilcoxon_rank_sum,
    write_report,
)
from src.model import ModelParams
from src.utils.exceptions import ArgumentError, EmptyDatasetError
from tests.helpers import random_params


def _brute_ap(relevance, ell):
    padded = list(relevance[:ell]) + [0] * max(0, ell - len(relevance))
    total = 0.0
    for j, r in enumerate(padded):
        if r:
            total += sum(padded[:j + 1]) / (j + 1)
    return total / ell


def _brute_p_value(a, b):
    values = list(a) + list(b)
    n = len(values)
    # midranks
    ranks = [sum(1 for w in values if w < v) + (sum(1 for w in values if w == v) + 1) / 2 for v in values]
    observed = sum(ranks[:len(a)])
    centre = len(a) * (n + 1) / 2
    extreme = total = 0
    for chosen in combinations(range(n), len(a)):
        total += 1
        if abs(sum(ranks[i] for i in chosen) - centre) >= abs(observed - centre) - 1e-9:
            extreme += 1
    return extreme / total


def _scored_dataset():
    """g(u, i) = V_i + 10 for every user; test items 4, 5, 6 for user 0 and item 4 for user 1."""
    params = ModelParams(
        U=np.ones((2, 1)),
        V=np.array([[0.0], [0.0], [0.0], [0.0], [0.5], [0.8], [0.1]]),
        W1=np.ones((1, 1)),
        b1=np.array([10.0]),
        w2=np.ones(1),
        b2=np.asarray(0.0),
    )
    train = Interactions(users=np.array([0, 0, 0, 0, 1, 1]), items=np.array([0, 1, 2, 3, 0, 1]),
                         labels=np.array([1, 0, 1, 0, 1, 0]), timestamps=np.arange(6))
    test = Interactions(users=np.array([0, 0, 0, 1]), items=np.array([4, 5, 6, 4]),
                        labels=np.array([0, 1, 1, 0]), timestamps=np.arange(6, 10))
    ds = Dataset(user_ids=np.array(["a", "b"], dtype=object),
                 item_ids=np.array([f"i{i}" for i in range(7)], dtype=object), train=train, test=test)
    return params, ds


class TestAveragePrecision:

    def test_example(self):
        assert ap_at([1, 0, 1], 3) == pytest.approx(5 / 9)
        assert ap_at([1, 0, 1]) == pytest.approx(5 / 9)

    def test_short_list_is_padded(self):
        assert ap_at([1], 4) == pytest.approx(0.25)
        assert ap_at([], 2) == 0.0

    def test_agrees_with_definition(self):
        for length in range(7):
            for relevance in product((0, 1), repeat=length):
                for ell in range(1, 8):
                    assert ap_at(relevance, ell) == pytest.approx(_brute_ap(relevance, ell), abs=1e-12)

    def test_moving_a_relevant_item_up_never_hurts(self):
        for length in range(2, 7):
            for relevance in product((0, 1), repeat=length):
                for j in range(length - 1):
                    if relevance[j] == 0 and relevance[j + 1] == 1:
                        improved = list(relevance)
                        improved[j], improved[j + 1] = 1, 0
                        for ell in range(1, 7):
                            assert ap_at(improved, ell) >= ap_at(relevance, ell) - 1e-12

    def test_invalid(self):
        with pytest.raises(ArgumentError):
            ap_at([1, 0], 0)
        with pytest.raises(ArgumentError):
            ap_at([2, 0], 1)


class TestRankSum:

    def test_separated_samples(self):
        statistic, p_value = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
        assert statistic == 6.0
        assert p_value == pytest.approx(0.1)

    def test_identical_values(self):
        assert wilcoxon_rank_sum([0.5] * 4, [0.5] * 3) == (16.0, 1.0)

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            a = rng.integers(0, 5, size=int(rng.integers(1, 9))) / 4
            b = rng.integers(0, 5, size=int(rng.integers(1, 9))) / 4
            if len(set(a) | set(b)) == 1:
                continue
            _, p_value = wilcoxon_rank_sum(a, b)
            assert p_value == pytest.approx(_brute_p_value(a, b), abs=1e-12)

    def test_asymptotic_is_symmetric(self):
        rng = np.random.default_rng(8)
        a, b = rng.uniform(size=40), rng.uniform(0.2, 1.2, size=50)
        _, p_ab = wilcoxon_rank_sum(a, b)
        _, p_ba = wilcoxon_rank_sum(b, a)
        assert p_ab == pytest.approx(p_ba)
        assert 0.0 <= p_ab <= 1.0

    def test_empty_sample(self):
        with pytest.raises(ArgumentError):
            wilcoxon_rank_sum([], [1.0])

    def test_compare_reports_level(self):
        _, p_value, significant = compare_reports(np.zeros(30), np.ones(30))
        assert p_value < 0.01 and significant
        assert compare_reports([0.2, 0.4], [0.3, 0.1])[2] is False

    @pytest.mark.slow
    def test_calibrated_under_the_null(self):
        rng = np.random.default_rng(0)
        p_values = np.array([wilcoxon_rank_sum(rng.normal(size=30), rng.normal(size=30))[1] for _ in range(10_000)])
        assert abs(np.mean(p_values < 0.01) - 0.01) <= 0.004


class TestEvaluate:

    def test_oracle_scores(self):
        params, ds = _scored_dataset()
        report = evaluate(params, ds, Setting.INTERACTED, ells=(1, 3))
        assert report.per_user_ap[0] == pytest.approx((1.0, 5 / 9))
        assert report.per_user_ap[1] == (0.0, 0.0)
        assert report.map_at[3] == pytest.approx(5 / 18)
        assert report.n_users_evaluated == 2

    def test_all_setting_excludes_train_items(self):
        params, ds = _scored_dataset()
        report = evaluate(params, ds, Setting.ALL, ells=(3,))
        assert report.per_user_ap[0] == pytest.approx((5 / 9,))

    def test_skip_users_without_relevant_items(self):
        params, ds = _scored_dataset()
        report = evaluate(params, ds, ells=(3,), skip_no_relevant=True)
        assert list(report.per_user_ap) == [0]
        assert report.map_at[3] == pytest.approx(5 / 9)

    def test_interacted_top_one_dominates_all_items(self, toy_dataset):
        for seed in range(5):
            params = random_params(toy_dataset.n_users, toy_dataset.n_items, seed=seed)
            params.scorer = Scorer.DOT
            interacted = evaluate(params, toy_dataset, Setting.INTERACTED, ells=(1,))
            everything = evaluate(params, toy_dataset, Setting.ALL, ells=(1,))
            assert everything.map_at[1] <= interacted.map_at[1] + 1e-12
            for u, aps in everything.per_user_ap.items():
                assert aps[0] <= interacted.per_user_ap[u][0]

    def test_threads(self, toy_dataset):
        params = random_params(toy_dataset.n_users, toy_dataset.n_items, seed=1)
        single = evaluate(params, toy_dataset, ells=(1, 5), threads=1)
        pooled = evaluate(params, toy_dataset, ells=(1, 5), threads=3)
        assert single.per_user_ap == pooled.per_user_ap

    def test_empty_test_split(self):
        params, ds = _scored_dataset()
        empty = Dataset(user_ids=ds.user_ids, item_ids=ds.item_ids, train=ds.train, test=Interactions.empty())
        with pytest.raises(EmptyDatasetError):
            evaluate(params, empty)

    def test_pairwise_accuracy(self):
        params, ds = _scored_dataset()
        assert pairwise_accuracy(params, ds) == pytest.approx(0.5)

    def test_report_files(self, tmp_path):
        params, ds = _scored_dataset()
        report = evaluate(params, ds, ells=(1, 3))
        write_report(report, tmp_path)
        assert (tmp_path / PER_USER_FILE).read_text().splitlines()[0] == "user\tap@1\tap@3"
        column = read_per_user_ap(tmp_path, 3)
        assert column.loc[0] == pytest.approx(5 / 9)
        assert column.loc[1] == 0.0
        assert "MAP@3\t" in (tmp_path / "report.txt").read_text()

    def test_missing_column(self, tmp_path):
        params, ds = _scored_dataset()
        write_report(evaluate(params, ds, ells=(1,)), tmp_path)
        with pytest.raises(ArgumentError):
            read_per_user_ap(tmp_path, 5)
