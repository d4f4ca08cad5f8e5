'''
Interaction log ingestion, preprocessing and the temporal train/test split.

Raw logs are held as a pandas frame with columns `user_id`, `item_id`,
`rating`, `timestamp` (one row per `RawInteraction`, file order). The
prepared `Dataset` is columnar numpy and immutable.
'''
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterator, Optional

import numpy as np
import pandas as pd

from consts import (
    DEFAULT_MIN_RATINGS,
    DEFAULT_THRESHOLD,
    DEFAULT_TRAIN_FRACTION,
    CountMode,
    DataFormat,
    Setting,
)
from src.utils.exceptions import ArgumentError, EmptyDatasetError, EmptyInputError, ParseError
from src.utils.logger import Logger

logger = Logger("[dataset]")

COLUMNS = ["user_id", "item_id", "rating", "timestamp"]

INDEX_FILE = "index.map"
TRAIN_FILE = "train.tsv"
TEST_FILE = "test.tsv"
STATS_FILE = "stats.txt"


@dataclass(frozen=True)
class RawInteraction:
    user_id: str
    item_id: str
    rating: float
    timestamp: int


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    min_ratings_per_user: int = DEFAULT_MIN_RATINGS
    threshold: float = DEFAULT_THRESHOLD
    count_mode: CountMode = CountMode.RAW
    user_fraction: float = 1.0
    item_fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ArgumentError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.min_ratings_per_user < 0:
            raise ArgumentError(f"min_ratings_per_user must be >= 0, got {self.min_ratings_per_user}")
        for name in ("user_fraction", "item_fraction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ArgumentError(f"{name} must be in (0, 1], got {value}")
        object.__setattr__(self, "count_mode", CountMode(self.count_mode))


@dataclass(frozen=True)
class Interactions:
    """Columnar (u, i, y, t) rows over dense indices."""
    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray
    timestamps: np.ndarray

    def __len__(self):
        return len(self.users)

    @classmethod
    def empty(cls):
        return cls(*(np.zeros(0, dtype=np.int64) for _ in range(4)))


def _grouped_items(users, items, n_users):
    """CSR layout of items per user, items ascending within a user."""
    order = np.lexsort((items, users))
    counts = np.bincount(users, minlength=n_users)
    indptr = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, items[order].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Dataset:
    user_ids: np.ndarray
    item_ids: np.ndarray
    train: Interactions
    test: Interactions
    seed: int = 0
    pos_indptr: np.ndarray = field(init=False, repr=False)
    pos_flat: np.ndarray = field(init=False, repr=False)
    neg_indptr: np.ndarray = field(init=False, repr=False)
    neg_flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n_users, n_items = self.n_users, self.n_items
        for name, part in (("train", self.train), ("test", self.test)):
            if len(part) and (part.users.min() < 0 or part.users.max() >= n_users
                              or part.items.min() < 0 or part.items.max() >= n_items):
                raise ArgumentError(f"{name} holds indices outside [0,{n_users})x[0,{n_items})")

        positive = self.train.labels == 1
        pos_indptr, pos_flat = _grouped_items(self.train.users[positive], self.train.items[positive], n_users)
        neg_indptr, neg_flat = _grouped_items(self.train.users[~positive], self.train.items[~positive], n_users)
        object.__setattr__(self, "pos_indptr", pos_indptr)
        object.__setattr__(self, "pos_flat", pos_flat)
        object.__setattr__(self, "neg_indptr", neg_indptr)
        object.__setattr__(self, "neg_flat", neg_flat)

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @cached_property
    def user_index(self) -> Dict[str, int]:
        return {uid: idx for idx, uid in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> Dict[str, int]:
        return {iid: idx for idx, iid in enumerate(self.item_ids)}

    def pos_items(self, u):
        return self.pos_flat[self.pos_indptr[u]:self.pos_indptr[u + 1]]

    def neg_items(self, u):
        return self.neg_flat[self.neg_indptr[u]:self.neg_indptr[u + 1]]

    @cached_property
    def pos_counts(self):
        return np.diff(self.pos_indptr)

    @cached_property
    def neg_counts(self):
        return np.diff(self.neg_indptr)

    @cached_property
    def eligible_users(self):
        """Users with at least one preferred and one non-preferred training item."""
        return np.flatnonzero((self.pos_counts > 0) & (self.neg_counts > 0))

    @cached_property
    def train_items_by_user(self):
        indptr, flat = _grouped_items(self.train.users, self.train.items, self.n_users)
        return [flat[indptr[u]:indptr[u + 1]] for u in range(self.n_users)]

    @cached_property
    def test_users(self):
        return np.unique(self.test.users)

    @cached_property
    def test_labels(self) -> Dict[int, Dict[int, int]]:
        """user -> {item: label} over the test split."""
        labels: Dict[int, Dict[int, int]] = {}
        for u, i, y in zip(self.test.users.tolist(), self.test.items.tolist(), self.test.labels.tolist()):
            labels.setdefault(u, {})[i] = y
        return labels


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_interactions: int
    sparsity: float
    n_train: int
    n_test: int
    n_test_dropped: int
    train_users: int
    train_items: int
    excluded_users: int
    n_pos_min: int
    n_neg_min: int
    mean_interacted_candidates: float
    seed: int

    def to_text(self, reference=None):
        lines = [
            f"users\t{self.n_users}",
            f"items\t{self.n_items}",
            f"interactions\t{self.n_interactions}",
            f"sparsity_pct\t{self.sparsity:.3f}",
            f"train_interactions\t{self.n_train}",
            f"test_interactions\t{self.n_test}",
            f"test_dropped_unseen\t{self.n_test_dropped}",
            f"train_users\t{self.train_users}",
            f"train_items\t{self.train_items}",
            f"users_excluded_from_triplets\t{self.excluded_users}",
            f"n_pos_min\t{self.n_pos_min}",
            f"n_neg_min\t{self.n_neg_min}",
            f"mean_interacted_candidates\t{self.mean_interacted_candidates:.3f}",
            f"seed\t{self.seed}",
        ]
        if reference is not None:
            users, items, interactions, sparsity = reference
            lines += [
                f"reference_users\t{users}",
                f"reference_items\t{items}",
                f"reference_interactions\t{interactions}",
                f"reference_sparsity_pct\t{sparsity:.3f}",
            ]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- ingestion

def load_interactions(path, data_format=DataFormat.TSV_RATING) -> pd.DataFrame:
    """Parse a `user \\t item \\t rating|click \\t timestamp` log, one row per line in file order."""
    data_format = DataFormat(data_format)
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")

    lines = pd.Series(path.read_text().splitlines(), dtype=object)
    if lines.empty:
        raise EmptyInputError(f"{path} is empty")

    parts = lines.str.split("\t", expand=True)
    if parts.shape[1] < 4:
        raise ParseError(1, f"expected 4 tab-separated fields, got {parts.shape[1]}")
    parts = parts.iloc[:, :4]
    parts.columns = COLUMNS

    missing = parts.isna() | (parts == "")
    if missing.any(axis=None):
        line = int(np.flatnonzero(missing.any(axis=1).to_numpy())[0]) + 1
        raise ParseError(line, "expected at least 4 non-empty tab-separated fields")

    rating = pd.to_numeric(parts["rating"], errors="coerce")
    timestamp = pd.to_numeric(parts["timestamp"], errors="coerce")
    bad = ~np.isfinite(rating.to_numpy(dtype=float)) | timestamp.isna().to_numpy()
    bad |= ~bad & ((timestamp.fillna(0) < 0) | (timestamp.fillna(0) % 1 != 0)).to_numpy()
    if data_format == DataFormat.TSV_CLICK:
        bad |= ~rating.isin([0, 1]).to_numpy()
    if bad.any():
        line = int(np.flatnonzero(bad)[0]) + 1
        raise ParseError(line, "rating must be finite and timestamp a non-negative integer")

    frame = pd.DataFrame({
        "user_id": parts["user_id"].astype(str),
        "item_id": parts["item_id"].astype(str),
        "rating": rating.astype(np.float64),
        "timestamp": timestamp.astype(np.int64),
    })
    logger.info(f"Loaded {len(frame)} interactions from {path}")
    return frame


def iter_interactions(frame) -> Iterator[RawInteraction]:
    for row in frame.itertuples(index=False):
        yield RawInteraction(row.user_id, row.item_id, row.rating, row.timestamp)


# ------------------------------------------------------------ preprocessing

def deduplicate(frame):
    """Keep the latest row of each (user, item) pair; equal timestamps keep the later line."""
    latest = frame.sort_values("timestamp", kind="stable").drop_duplicates(["user_id", "item_id"], keep="last")
    dropped = len(frame) - len(latest)
    if dropped:
        logger.debug(f"Dropped {dropped} superseded duplicate rows")
    return frame.loc[latest.index.sort_values()]


def subsample(frame, user_fraction=1.0, item_fraction=1.0, seed=0):
    """Random user and item subsets, as done for the large rating collections."""
    if user_fraction >= 1.0 and item_fraction >= 1.0:
        return frame
    rng = np.random.default_rng(seed)
    keep = np.ones(len(frame), dtype=bool)
    for column, fraction in (("user_id", user_fraction), ("item_id", item_fraction)):
        if fraction >= 1.0:
            continue
        values = frame[column].unique()
        size = max(1, int(round(fraction * len(values))))
        chosen = rng.choice(values, size=size, replace=False)
        keep &= frame[column].isin(chosen).to_numpy()
    logger.info(f"Subsampled {keep.sum()} of {len(frame)} interactions")
    return frame[keep]


def binarize(frame, threshold=DEFAULT_THRESHOLD):
    out = frame.copy()
    out["rating"] = (frame["rating"] >= threshold).astype(np.int64)
    return out


def filter_users(frame, spec: SplitSpec):
    """
    Keep users with at least `min_ratings_per_user` interactions and both labels present.
    Items are never removed, so one pass reaches the fixpoint.
    """
    per_user = frame.groupby("user_id", sort=False)["rating"].agg(["size", "sum"])
    counted = per_user["size"] if spec.count_mode == CountMode.RAW else per_user["sum"]
    keep = (counted >= spec.min_ratings_per_user) & (per_user["sum"] >= 1) & (per_user["sum"] < per_user["size"])
    result = frame[frame["user_id"].isin(per_user.index[keep])]
    logger.info(f"Kept {int(keep.sum())} of {len(per_user)} users ({len(result)} interactions)")
    if result.empty:
        raise EmptyDatasetError("no user survives the preprocessing filters")
    return result


def temporal_split(frame, spec: SplitSpec, seed=0) -> Dataset:
    """
    Chronological split: the earliest `train_fraction` of interactions train the model.
    Test rows whose user or item never occurs in train are dropped.
    """
    ordered = frame.sort_values("timestamp", kind="stable")
    cut = int(spec.train_fraction * len(ordered))
    train_frame, test_frame = ordered.iloc[:cut], ordered.iloc[cut:]
    if train_frame.empty:
        raise EmptyDatasetError("train split is empty")

    user_codes, user_ids = pd.factorize(train_frame["user_id"])
    item_codes, item_ids = pd.factorize(train_frame["item_id"])
    user_ids, item_ids = pd.Index(user_ids), pd.Index(item_ids)

    test_users = user_ids.get_indexer(test_frame["user_id"])
    test_items = item_ids.get_indexer(test_frame["item_id"])
    seen = (test_users >= 0) & (test_items >= 0)
    if (~seen).any():
        logger.debug(f"Dropped {int((~seen).sum())} test rows with unseen users or items")

    ds = Dataset(
        user_ids=np.asarray(user_ids, dtype=object),
        item_ids=np.asarray(item_ids, dtype=object),
        train=Interactions(
            users=user_codes.astype(np.int64),
            items=item_codes.astype(np.int64),
            labels=train_frame["rating"].to_numpy(dtype=np.int64),
            timestamps=train_frame["timestamp"].to_numpy(dtype=np.int64),
        ),
        test=Interactions(
            users=test_users[seen].astype(np.int64),
            items=test_items[seen].astype(np.int64),
            labels=test_frame["rating"].to_numpy(dtype=np.int64)[seen],
            timestamps=test_frame["timestamp"].to_numpy(dtype=np.int64)[seen],
        ),
        seed=seed,
    )
    excluded = ds.n_users - len(ds.eligible_users)
    if excluded:
        logger.warning(f"{excluded} users lack a preferred or non-preferred train item; excluded from triplets")
    return ds


def candidate_sets(ds: Dataset, setting, all_includes_train=False) -> Dict[int, np.ndarray]:
    """Per test user, the items to rank: the ones shown in test, or the whole catalog."""
    setting = Setting(setting)
    if setting == Setting.INTERACTED:
        shown = pd.DataFrame({"u": ds.test.users, "i": ds.test.items}).drop_duplicates()
        return {int(u): group.to_numpy(dtype=np.int64) for u, group in shown.groupby("u", sort=True)["i"]}

    catalog = np.arange(ds.n_items, dtype=np.int64)
    candidates = {}
    for u in ds.test_users.tolist():
        if all_includes_train:
            candidates[u] = catalog
        else:
            candidates[u] = np.setdiff1d(catalog, ds.train_items_by_user[u], assume_unique=True)
    return candidates


# ------------------------------------------------------------------ pipeline

def dataset_stats(frame, ds: Dataset) -> DatasetStats:
    n_users = frame["user_id"].nunique()
    n_items = frame["item_id"].nunique()
    n_interactions = len(frame)
    eligible = ds.eligible_users
    interacted = candidate_sets(ds, Setting.INTERACTED)
    return DatasetStats(
        n_users=n_users,
        n_items=n_items,
        n_interactions=n_interactions,
        sparsity=100.0 * (1.0 - n_interactions / (n_users * n_items)),
        n_train=len(ds.train),
        n_test=len(ds.test),
        n_test_dropped=n_interactions - len(ds.train) - len(ds.test),
        train_users=ds.n_users,
        train_items=ds.n_items,
        excluded_users=ds.n_users - len(eligible),
        n_pos_min=int(ds.pos_counts[eligible].min()) if len(eligible) else 0,
        n_neg_min=int(ds.neg_counts[eligible].min()) if len(eligible) else 0,
        mean_interacted_candidates=float(np.mean([len(c) for c in interacted.values()])) if interacted else 0.0,
        seed=ds.seed,
    )


def prepare(frame, spec: SplitSpec, seed=0):
    """deduplicate -> subsample -> binarize -> filter_users -> temporal_split"""
    frame = deduplicate(frame)
    frame = subsample(frame, spec.user_fraction, spec.item_fraction, seed)
    frame = binarize(frame, spec.threshold)
    frame = filter_users(frame, spec)
    ds = temporal_split(frame, spec, seed)
    stats = dataset_stats(frame, ds)
    logger.info(f"Prepared N={stats.n_users} M={stats.n_items} interactions={stats.n_interactions} "
                f"sparsity={stats.sparsity:.3f}%")
    return ds, stats


def _interactions_frame(part: Interactions):
    return pd.DataFrame({"u": part.users, "i": part.items, "y": part.labels, "t": part.timestamps})


def save_prepared(ds: Dataset, stats: Optional[DatasetStats], out_dir, reference=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    index = pd.concat([
        pd.DataFrame({"kind": "user", "id": ds.user_ids, "index": np.arange(ds.n_users)}),
        pd.DataFrame({"kind": "item", "id": ds.item_ids, "index": np.arange(ds.n_items)}),
    ])
    index.to_csv(out_dir / INDEX_FILE, sep="\t", header=False, index=False, lineterminator="\n")
    _interactions_frame(ds.train).to_csv(out_dir / TRAIN_FILE, sep="\t", header=False, index=False, lineterminator="\n")
    _interactions_frame(ds.test).to_csv(out_dir / TEST_FILE, sep="\t", header=False, index=False, lineterminator="\n")
    if stats is not None:
        (out_dir / STATS_FILE).write_text(stats.to_text(reference))
    logger.info(f"Wrote prepared dataset to {out_dir}")


def _read_interactions(path):
    if path.stat().st_size == 0:
        return Interactions.empty()
    frame = pd.read_csv(path, sep="\t", header=None, names=["u", "i", "y", "t"], dtype=np.int64)
    return Interactions(*(frame[c].to_numpy() for c in ("u", "i", "y", "t")))


def load_prepared(directory, seed=0) -> Dataset:
    directory = Path(directory)
    for name in (INDEX_FILE, TRAIN_FILE, TEST_FILE):
        if not (directory / name).is_file():
            raise FileNotFoundError(f"{directory / name} not found")

    index = pd.read_csv(directory / INDEX_FILE, sep="\t", header=None, names=["kind", "id", "index"],
                        dtype={"kind": str, "id": str, "index": np.int64}, keep_default_na=False)
    users = index[index["kind"] == "user"].sort_values("index")
    items = index[index["kind"] == "item"].sort_values("index")
    return Dataset(
        user_ids=users["id"].to_numpy(dtype=object),
        item_ids=items["id"].to_numpy(dtype=object),
        train=_read_interactions(directory / TRAIN_FILE),
        test=_read_interactions(directory / TEST_FILE),
        seed=seed,
    )
