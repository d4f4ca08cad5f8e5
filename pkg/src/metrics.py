'''
Ranking quality and significance.

AP@l here is (1/l) * sum_j r_j * Pr(j): the normaliser is the cut-off l,
not the number of relevant items, and lists shorter than l are padded with
non-relevant entries. MAP@l is the mean of AP@l over the evaluated users.
'''
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import mannwhitneyu, permutation_test, rankdata

from consts import EXACT_WILCOXON_MAX, SIGNIFICANCE_LEVEL, Setting
from src.dataset import Dataset, candidate_sets
from src.model import ModelParams, score_items
from src.ranker import topk_sort
from src.utils.exceptions import ArgumentError, EmptyDatasetError
from src.utils.logger import Logger

logger = Logger("[metrics]")

REPORT_FILE = "report.txt"
PER_USER_FILE = "per_user_ap.tsv"


@dataclass
class EvalReport:
    setting: Setting
    ells: Tuple[int, ...]
    map_at: Dict[int, float] = field(default_factory=dict)
    per_user_ap: Dict[int, Tuple[float, ...]] = field(default_factory=dict)
    n_users_evaluated: int = 0

    def ap_column(self, ell):
        position = self.ells.index(ell)
        return np.array([aps[position] for aps in self.per_user_ap.values()])

    def to_text(self):
        lines = [f"setting\t{self.setting.value}", f"users_evaluated\t{self.n_users_evaluated}"]
        lines += [f"MAP@{ell}\t{self.map_at[ell]!r}" for ell in self.ells]
        return "\n".join(lines) + "\n"


def ap_at(relevance: Sequence[int], ell=None):
    relevance = np.asarray(relevance, dtype=np.float64)
    ell = len(relevance) if ell is None else ell
    if ell < 1:
        raise ArgumentError(f"cut-off must be >= 1, got {ell}")
    if relevance.size and not np.isin(relevance, (0.0, 1.0)).all():
        raise ArgumentError("relevance entries must be 0 or 1")

    r = np.zeros(ell)
    head = relevance[:ell]
    r[:len(head)] = head
    precision = np.cumsum(r) / np.arange(1, ell + 1)
    return float(np.dot(r, precision) / ell)


def _check_ells(ells):
    ells = tuple(int(ell) for ell in ells)
    if not ells or min(ells) < 1:
        raise ArgumentError(f"cut-offs must be >= 1, got {list(ells)}")
    return ells


def evaluate(
    params: ModelParams,
    ds: Dataset,
    setting=Setting.INTERACTED,
    ells=(1, 5, 10),
    threads=1,
    skip_no_relevant=False,
    all_includes_train=False,
) -> EvalReport:
    setting = Setting(setting)
    ells = _check_ells(ells)
    if len(ds.test) == 0:
        raise EmptyDatasetError("test split is empty")

    candidates = candidate_sets(ds, setting, all_includes_train)
    labels = ds.test_labels
    depth = max(ells)

    def user_aps(u):
        relevant = {i for i, y in labels.get(u, {}).items() if y == 1}
        if skip_no_relevant and not relevant.intersection(candidates[u].tolist()):
            return None
        ranked = topk_sort(params, u, candidates[u], depth)
        hits = [1 if i in relevant else 0 for i in ranked.items.tolist()]
        return tuple(ap_at(hits, ell) for ell in ells)

    users = sorted(u for u, items in candidates.items() if len(items))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(user_aps, users))
    else:
        results = [user_aps(u) for u in users]

    report = EvalReport(setting=setting, ells=ells)
    report.per_user_ap = {u: aps for u, aps in zip(users, results) if aps is not None}
    report.n_users_evaluated = len(report.per_user_ap)
    if report.n_users_evaluated == 0:
        raise EmptyDatasetError(f"no test user to evaluate in the {setting.value} setting")
    for ell in ells:
        report.map_at[ell] = float(np.mean(report.ap_column(ell)))

    logger.info(f"{setting.value}: " + " ".join(f"MAP@{ell}={report.map_at[ell]:.4f}" for ell in ells)
                + f" over {report.n_users_evaluated} users")
    return report


def _exact_two_sided(a, b):
    """Share of all splits of the pooled sample whose rank sum lies at least as far from the mean as observed."""
    n_a, n = a.size, a.size + b.size
    centre = n_a * (n + 1) / 2.0

    def distance(x, y, axis):
        ranks = rankdata(np.concatenate([x, y], axis=axis), axis=axis)
        return np.abs(np.take(ranks, range(n_a), axis=axis).sum(axis=axis) - centre)

    result = permutation_test((a, b), distance, permutation_type="independent", n_resamples=np.inf,
                              alternative="greater", vectorized=True)
    return float(result.pvalue)


def wilcoxon_rank_sum(ap_a: Sequence[float], ap_b: Sequence[float], exact=None):
    """
    Two-sided rank-sum test of sample a against sample b.
    Returns (rank sum of a, p-value). Exact enumeration when both samples
    have at most EXACT_WILCOXON_MAX values, otherwise the tie-corrected
    normal approximation.
    """
    a = np.asarray(ap_a, dtype=np.float64)
    b = np.asarray(ap_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ArgumentError("both samples must be non-empty")

    combined = np.concatenate([a, b])
    ranks = rankdata(combined)
    statistic = float(ranks[:a.size].sum())
    if np.all(combined == combined[0]):
        return statistic, 1.0

    if exact is None:
        exact = a.size <= EXACT_WILCOXON_MAX and b.size <= EXACT_WILCOXON_MAX
    if exact:
        return statistic, _exact_two_sided(a, b)

    result = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=False)
    return statistic, float(result.pvalue)


def compare_reports(per_user_a, per_user_b, level=SIGNIFICANCE_LEVEL):
    statistic, p_value = wilcoxon_rank_sum(np.asarray(per_user_a), np.asarray(per_user_b))
    return statistic, p_value, p_value < level


def pairwise_accuracy(params: ModelParams, ds: Dataset):
    """Fraction of held-out (preferred, non-preferred) pairs of a user ordered correctly; ties count half."""
    correct = 0.0
    total = 0
    for u, labels in sorted(ds.test_labels.items()):
        pos = np.array([i for i, y in labels.items() if y == 1], dtype=np.int64)
        neg = np.array([i for i, y in labels.items() if y != 1], dtype=np.int64)
        if not len(pos) or not len(neg):
            continue
        g_neg = np.sort(score_items(params, u, neg))
        g_pos = score_items(params, u, pos)
        below = np.searchsorted(g_neg, g_pos, side="left")
        equal = np.searchsorted(g_neg, g_pos, side="right") - below
        correct += below.sum() + 0.5 * equal.sum()
        total += len(pos) * len(neg)
    if total == 0:
        raise EmptyDatasetError("no user has both preferred and non-preferred test items")
    return float(correct / total)


def write_report(report: EvalReport, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_FILE).write_text(report.to_text())
    frame = pd.DataFrame(
        [[u, *(repr(ap) for ap in aps)] for u, aps in report.per_user_ap.items()],
        columns=["user", *(f"ap@{ell}" for ell in report.ells)],
    )
    frame.to_csv(out_dir / PER_USER_FILE, sep="\t", index=False, lineterminator="\n")
    logger.debug(f"Wrote evaluation report to {out_dir}")


def read_per_user_ap(path, ell) -> pd.Series:
    path = Path(path)
    if path.is_dir():
        path = path / PER_USER_FILE
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    frame = pd.read_csv(path, sep="\t")
    column = f"ap@{ell}"
    if column not in frame.columns:
        raise ArgumentError(f"{path} has no {column} column")
    return frame.set_index("user")[column]
