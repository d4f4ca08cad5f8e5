'''
Training objectives over triplet batches.

  L_c: logistic surrogate on network score differences g(Phi(u,i')) - g(Phi(u,i))
  L_p: logistic surrogate on embedding dot products U_u.(V_i' - V_i), plus norm penalty
  L_cp: alpha * L_c + (1 - alpha) * L_p
'''
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from consts import Variant
from src.model import ModelParams, forward
from src.utils.exceptions import ArgumentError, ConfigError


@dataclass(frozen=True)
class Triplet:
    """User `u` prefers item `i` over `i_prime` when `y` is +1."""
    i: int
    u: int
    i_prime: int
    y: int = 1

    def __post_init__(self):
        if self.i == self.i_prime:
            raise ArgumentError(f"triplet compares item {self.i} with itself")
        if self.y not in (-1, 1):
            raise ArgumentError(f"label must be -1 or +1, got {self.y}")


@dataclass(frozen=True)
class TripletBatch:
    users: np.ndarray
    items: np.ndarray
    other_items: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = len(self.users)
        if not (len(self.items) == len(self.other_items) == len(self.labels) == n):
            raise ArgumentError("batch columns have different lengths")

    def __len__(self):
        return len(self.users)

    @classmethod
    def from_triplets(cls, triplets: Sequence[Triplet]):
        return cls(
            users=np.array([t.u for t in triplets], dtype=np.int64),
            items=np.array([t.i for t in triplets], dtype=np.int64),
            other_items=np.array([t.i_prime for t in triplets], dtype=np.int64),
            labels=np.array([t.y for t in triplets], dtype=np.int64),
        )

    def triplets(self):
        return [Triplet(int(i), int(u), int(j), int(y))
                for u, i, j, y in zip(self.users, self.items, self.other_items, self.labels)]


@dataclass(frozen=True)
class ObjectiveSpec:
    variant: Variant = Variant.CP
    alpha: float = 0.5
    lam: float = 0.0
    plain_norm_reg: bool = False
    unweighted_sum: bool = False

    def __post_init__(self):
        problems = []
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            problems.append(f"variant must be one of c, p, cp; got {self.variant!r}")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.lam >= 0.0:
            problems.append(f"lambda must be >= 0, got {self.lam}")
        if problems:
            raise ConfigError(problems)


BatchLike = Union[TripletBatch, Sequence[Triplet]]


def as_batch(batch: BatchLike) -> TripletBatch:
    if not isinstance(batch, TripletBatch):
        batch = TripletBatch.from_triplets(batch)
    if len(batch) == 0:
        raise ArgumentError("empty batch")
    return batch


def softplus(x):
    """log(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def margins_c(params: ModelParams, batch: BatchLike):
    batch = as_batch(batch)
    g_i = forward(params, batch.users, batch.items).g
    g_j = forward(params, batch.users, batch.other_items).g
    return batch.labels * (g_j - g_i)


def margins_p(params: ModelParams, batch: BatchLike):
    batch = as_batch(batch)
    Uu = params.U[batch.users]
    return batch.labels * np.einsum("nk,nk->n", Uu, params.V[batch.other_items] - params.V[batch.items])


def _penalty(vectors, plain_norm):
    squared = np.einsum("nk,nk->n", vectors, vectors)
    return np.sqrt(squared) if plain_norm else squared


def loss_c(params: ModelParams, batch: BatchLike):
    return float(np.mean(softplus(margins_c(params, batch))))


def loss_p(params: ModelParams, batch: BatchLike, lam=0.0, plain_norm=False):
    batch = as_batch(batch)
    terms = softplus(margins_p(params, batch))
    if lam > 0:
        terms = terms + lam * (_penalty(params.U[batch.users], plain_norm)
                               + _penalty(params.V[batch.other_items], plain_norm)
                               + _penalty(params.V[batch.items], plain_norm))
    return float(np.mean(terms))


def variant_weights(spec: ObjectiveSpec):
    """(weight of L_c, weight of L_p) for the chosen objective."""
    if spec.variant == Variant.C:
        return 1.0, 0.0
    if spec.variant == Variant.P:
        return 0.0, 1.0
    if spec.unweighted_sum:
        return 1.0, 1.0
    return spec.alpha, 1.0 - spec.alpha


def loss_combined(params: ModelParams, batch: BatchLike, spec: ObjectiveSpec):
    if spec.variant != Variant.CP:
        raise ArgumentError(f"loss_combined needs variant cp, got {spec.variant.value}")
    wc, wp = variant_weights(spec)
    return wc * loss_c(params, batch) + wp * loss_p(params, batch, spec.lam, spec.plain_norm_reg)


def objective_value(params: ModelParams, batch: BatchLike, spec: ObjectiveSpec):
    if spec.variant == Variant.C:
        return loss_c(params, batch)
    if spec.variant == Variant.P:
        return loss_p(params, batch, spec.lam, spec.plain_norm_reg)
    return loss_combined(params, batch, spec)
