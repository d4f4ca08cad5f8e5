'''
RecNet parameters and the network math.

Embedding layer: one-hot user/item -> rows of U (N x k) and V (M x k).
Mapping layer:   Phi(u, i) = U_u * V_i (element-wise).
Dense layer:     g(x) = w2 . relu(x W1 + b1) + b2, linear output.
Preference:      f(i, u, i') = g(Phi(u, i)) - g(Phi(u, i')).

A model trained on the representation loss alone never updates the dense
layer, so it ranks with the embedding dot product U_u . V_i instead of g.
'''
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.special import expit

from consts import SCHEMA_VERSION, Scorer, Variant
from src.utils.exceptions import ArgumentError, ConfigError, IndexRangeError, NumericError
from src.utils.logger import Logger

if TYPE_CHECKING:
    from src.objective import ObjectiveSpec, TripletBatch

logger = Logger("[model]")

PARAM_NAMES = ("U", "V", "W1", "b1", "w2", "b2")


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 1
    hidden_units: int = 32
    activation: str = "relu"
    init_scale: Optional[float] = None     # None: 1/sqrt(fan) per layer
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.embed_dim < 1:
            problems.append(f"embed_dim must be >= 1, got {self.embed_dim}")
        if self.hidden_units < 1:
            problems.append(f"hidden_units must be >= 1, got {self.hidden_units}")
        if self.activation != "relu":
            problems.append(f"activation must be 'relu', got {self.activation!r}")
        if self.init_scale is not None and not self.init_scale >= 0:
            problems.append(f"init_scale must be >= 0, got {self.init_scale}")
        if problems:
            raise ConfigError(problems)


@dataclass
class ModelParams:
    U: np.ndarray
    V: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray   # 0-d
    scorer: Scorer = Scorer.NETWORK

    @property
    def n_users(self):
        return self.U.shape[0]

    @property
    def n_items(self):
        return self.V.shape[0]

    @property
    def embed_dim(self):
        return self.U.shape[1]

    @property
    def hidden_units(self):
        return self.W1.shape[1]

    def arrays(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self):
        return ModelParams(**{name: array.copy() for name, array in self.arrays().items()}, scorer=self.scorer)

    def is_finite(self):
        return all(np.isfinite(array).all() for array in self.arrays().values())


@dataclass
class Gradients:
    """Embedding gradients are kept for touched rows only; every other row is exactly zero."""
    user_rows: np.ndarray
    dU: np.ndarray
    item_rows: np.ndarray
    dV: np.ndarray
    dW1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray

    def dense_U(self, n_users):
        out = np.zeros((n_users, self.dU.shape[1]))
        out[self.user_rows] = self.dU
        return out

    def dense_V(self, n_items):
        out = np.zeros((n_items, self.dV.shape[1]))
        out[self.item_rows] = self.dV
        return out

    def blocks(self):
        return (self.dU, self.dV, self.dW1, self.db1, self.dw2, self.db2)

    def norm(self):
        return float(np.sqrt(sum(np.sum(block ** 2) for block in self.blocks())))

    def scale(self, factor):
        for block in self.blocks():
            block *= factor

    def is_finite(self):
        return all(np.isfinite(block).all() for block in self.blocks())


@dataclass
class ForwardCache:
    x: np.ndarray
    a: np.ndarray
    h: np.ndarray
    g: np.ndarray


def init(config: ModelConfig, n_users, n_items) -> ModelParams:
    if n_users < 1 or n_items < 1:
        raise ArgumentError(f"need at least one user and one item, got N={n_users} M={n_items}")
    k, h = config.embed_dim, config.hidden_units
    rng = np.random.default_rng(config.seed)

    def uniform(shape, fan):
        bound = config.init_scale if config.init_scale is not None else 1.0 / np.sqrt(fan)
        return rng.uniform(-bound, bound, size=shape)

    return ModelParams(
        U=uniform((n_users, k), k),
        V=uniform((n_items, k), k),
        W1=uniform((k, h), k),
        b1=uniform((h,), k),
        w2=uniform((h,), h),
        b2=np.asarray(uniform((), h), dtype=np.float64),
    )


def one_hot(index, size):
    if not 0 <= index < size:
        raise IndexRangeError(f"index {index} outside [0, {size})")
    vector = np.zeros(size, dtype=np.int8)
    vector[index] = 1
    return vector


def _check_indices(params, u, items):
    if not 0 <= u < params.n_users:
        raise IndexRangeError(f"user index {u} outside [0, {params.n_users})")
    items = np.asarray(items)
    if items.size and (items.min() < 0 or items.max() >= params.n_items):
        raise IndexRangeError(f"item index outside [0, {params.n_items})")


def phi(params: ModelParams, u, i):
    _check_indices(params, u, [i])
    return params.U[u] * params.V[i]


def forward(params: ModelParams, users, items) -> ForwardCache:
    """Batched g(Phi(u, i)) keeping the intermediate activations for back-propagation."""
    x = params.U[users] * params.V[items]
    a = x @ params.W1 + params.b1
    h = np.maximum(a, 0.0)
    g = h @ params.w2 + params.b2
    return ForwardCache(x=x, a=a, h=h, g=g)


def scorer_for(variant) -> Scorer:
    return Scorer.DOT if Variant(variant) == Variant.P else Scorer.NETWORK


def score_g(params: ModelParams, u, i):
    x = phi(params, u, i)
    if params.scorer == Scorer.DOT:
        value = float(x.sum())
    else:
        value = float(np.maximum(x @ params.W1 + params.b1, 0.0) @ params.w2 + params.b2)
    if not np.isfinite(value):
        raise NumericError(f"non-finite score for user {u}, item {i}")
    return value


def score_f(params: ModelParams, i, u, i_prime):
    return score_g(params, u, i) - score_g(params, u, i_prime)


def score_items(params: ModelParams, u, items):
    items = np.asarray(items, dtype=np.int64)
    _check_indices(params, u, items)
    if params.scorer == Scorer.DOT:
        g = params.V[items] @ params.U[u]
    else:
        g = forward(params, np.full(len(items), u, dtype=np.int64), items).g
    if not np.isfinite(g).all():
        raise NumericError(f"non-finite scores for user {u}")
    return g


def _norm_grad(vectors, plain_norm):
    """Gradient of ||v||^2 or ||v|| row-wise; the plain norm uses subgradient 0 at the origin."""
    if not plain_norm:
        return 2.0 * vectors
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def backward(params: ModelParams, batch: "TripletBatch", objective: "ObjectiveSpec"):
    """Objective value on the batch and its exact gradient with respect to every parameter."""
    # objective builds on the forward pass defined here
    from src.objective import as_batch, objective_value, variant_weights

    batch = as_batch(batch)
    n = len(batch)
    loss = objective_value(params, batch, objective)
    wc, wp = variant_weights(objective)

    users, items, others = batch.users, batch.items, batch.other_items
    y = batch.labels.astype(np.float64)
    user_rows, u_inv = np.unique(users, return_inverse=True)
    item_rows, item_inv = np.unique(np.concatenate([items, others]), return_inverse=True)
    i_inv, j_inv = item_inv[:n], item_inv[n:]

    k, h = params.embed_dim, params.hidden_units
    dU = np.zeros((len(user_rows), k))
    dV = np.zeros((len(item_rows), k))
    dW1 = np.zeros((k, h))
    db1 = np.zeros(h)
    dw2 = np.zeros(h)
    db2 = np.zeros(())

    Uu, Vi, Vj = params.U[users], params.V[items], params.V[others]

    if wc:
        fi = forward(params, users, items)
        fj = forward(params, users, others)
        ds = wc * expit(y * (fj.g - fi.g)) / n
        dg_i, dg_j = -y * ds, y * ds

        dw2 += fi.h.T @ dg_i + fj.h.T @ dg_j
        db2 += dg_i.sum() + dg_j.sum()
        da_i = np.outer(dg_i, params.w2) * (fi.a > 0)
        da_j = np.outer(dg_j, params.w2) * (fj.a > 0)
        dW1 += fi.x.T @ da_i + fj.x.T @ da_j
        db1 += da_i.sum(axis=0) + da_j.sum(axis=0)

        dx_i, dx_j = da_i @ params.W1.T, da_j @ params.W1.T
        np.add.at(dU, u_inv, dx_i * Vi + dx_j * Vj)
        np.add.at(dV, i_inv, dx_i * Uu)
        np.add.at(dV, j_inv, dx_j * Uu)

    if wp:
        diff = Vj - Vi
        margin = y * np.einsum("nk,nk->n", Uu, diff)
        coef = (wp * expit(margin) / n * y)[:, None]
        np.add.at(dU, u_inv, coef * diff)
        np.add.at(dV, j_inv, coef * Uu)
        np.add.at(dV, i_inv, -coef * Uu)

        if objective.lam > 0:
            reg = wp * objective.lam / n
            np.add.at(dU, u_inv, reg * _norm_grad(Uu, objective.plain_norm_reg))
            np.add.at(dV, i_inv, reg * _norm_grad(Vi, objective.plain_norm_reg))
            np.add.at(dV, j_inv, reg * _norm_grad(Vj, objective.plain_norm_reg))

    grads = Gradients(user_rows=user_rows, dU=dU, item_rows=item_rows, dV=dV, dW1=dW1, db1=db1, dw2=dw2, db2=db2)
    if not np.isfinite(loss) or not grads.is_finite():
        raise NumericError(f"non-finite loss or gradient (loss={loss})")
    return loss, grads


# -------------------------------------------------------------- checkpoints

def save_checkpoint(path, params: ModelParams, config: ModelConfig):
    """Self-describing JSON; floats use the shortest repr that reads back bit-exactly."""
    document = {
        "schema_version": SCHEMA_VERSION,
        "model": asdict(config),
        "n_users": params.n_users,
        "n_items": params.n_items,
        "scorer": Scorer(params.scorer).value,
        "params": {
            name: {"shape": list(array.shape), "data": array.ravel(order="C").tolist()}
            for name, array in params.arrays().items()
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(document, indent=1) + "\n")
    tmp.replace(path)


def load_checkpoint(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    document = json.loads(path.read_text())
    if document.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint schema {document.get('schema_version')!r}")

    config = ModelConfig(**document["model"])
    arrays = {}
    for name in PARAM_NAMES:
        entry = document["params"][name]
        arrays[name] = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
    params = ModelParams(**arrays, scorer=Scorer(document.get("scorer", Scorer.NETWORK.value)))

    expected = {
        "U": (document["n_users"], config.embed_dim),
        "V": (document["n_items"], config.embed_dim),
        "W1": (config.embed_dim, config.hidden_units),
        "b1": (config.hidden_units,),
        "w2": (config.hidden_units,),
        "b2": (),
    }
    wrong = [f"{name} has shape {arrays[name].shape}, expected {shape}"
             for name, shape in expected.items() if arrays[name].shape != shape]
    if wrong:
        raise ConfigError(wrong)
    logger.debug(f"Loaded checkpoint {path} (N={params.n_users}, M={params.n_items}, k={params.embed_dim})")
    return params, config
