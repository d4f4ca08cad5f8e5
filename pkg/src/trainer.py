'''
Mini-batch stochastic training of RecNet with Adam.

One iteration samples a batch of canonical triplets, back-propagates the
objective once and applies one optimizer step. Embedding rows not touched
by the batch keep both their values and their Adam moments.
'''
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from consts import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPOCHS,
    DEFAULT_EPSILON,
    DEFAULT_LEARNING_RATE,
)
from src import model
from src.dataset import Dataset
from src.model import Gradients, ModelConfig, ModelParams
from src.objective import ObjectiveSpec, TripletBatch
from src.utils._consts import get_progress_window
from src.utils.exceptions import ConfigError, NumericError
from src.utils.logger import Logger

logger = Logger("[trainer]")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    eval_every: int = 0
    clip_norm: Optional[float] = None
    log_every: Optional[int] = None

    def __post_init__(self):
        problems = []
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                problems.append(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be > 0, got {self.epsilon}")
        if self.eval_every < 0:
            problems.append(f"eval_every must be >= 0, got {self.eval_every}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            problems.append(f"clip_norm must be > 0 when set, got {self.clip_norm}")
        if self.log_every is not None and self.log_every < 1:
            problems.append(f"log_every must be >= 1 when set, got {self.log_every}")
        if problems:
            raise ConfigError(problems)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams):
        return cls(
            m={name: np.zeros_like(array) for name, array in params.arrays().items()},
            v={name: np.zeros_like(array) for name, array in params.arrays().items()},
        )


@dataclass
class TrainingLog:
    iterations: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    val_map: Dict[int, float] = field(default_factory=dict)

    def append(self, iteration, loss, val_map=None):
        self.iterations.append(iteration)
        self.losses.append(loss)
        if val_map is not None:
            self.val_map[iteration] = val_map

    def line(self, index):
        iteration = self.iterations[index]
        row = f"{iteration}\t{self.losses[index]!r}"
        if iteration in self.val_map:
            row += f"\t{self.val_map[iteration]!r}"
        return row + "\n"

    def write_tsv(self, path):
        Path(path).write_text("".join(self.line(index) for index in range(len(self.iterations))))

    def window_median(self, start, size):
        return float(np.median(self.losses[start:start + size]))


def sample_batch(ds: Dataset, n, rng: np.random.Generator) -> TripletBatch:
    """n i.i.d. triplets: user uniform over eligible users, then a preferred and a non-preferred item."""
    eligible = ds.eligible_users
    if len(eligible) == 0:
        raise ConfigError("no user has both a preferred and a non-preferred training item")
    users = eligible[rng.integers(0, len(eligible), size=n)]
    pos = ds.pos_flat[ds.pos_indptr[users] + rng.integers(0, ds.pos_counts[users])]
    neg = ds.neg_flat[ds.neg_indptr[users] + rng.integers(0, ds.neg_counts[users])]
    return TripletBatch(users=users, items=pos, other_items=neg, labels=np.ones(n, dtype=np.int64))


def _adam_update(param, m, v, grad, cfg: TrainConfig, c1, c2, rows=None):
    if rows is None:
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * grad
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * grad * grad
        param -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
        return
    m_rows = cfg.beta1 * m[rows] + (1.0 - cfg.beta1) * grad
    v_rows = cfg.beta2 * v[rows] + (1.0 - cfg.beta2) * grad * grad
    m[rows] = m_rows
    v[rows] = v_rows
    param[rows] -= cfg.learning_rate * (m_rows / c1) / (np.sqrt(v_rows / c2) + cfg.epsilon)


def adam_step(params: ModelParams, grads: Gradients, state: AdamState, cfg: TrainConfig):
    """Bias-corrected Adam, lazy on embedding rows. Updates `params` and `state` in place."""
    if not grads.is_finite():
        bad = [name for name, block in zip(("U", "V", "W1", "b1", "w2", "b2"), grads.blocks())
               if not np.isfinite(block).all()]
        raise NumericError(f"non-finite gradient in {', '.join(bad)} at step {state.t + 1}")

    if cfg.clip_norm is not None:
        norm = grads.norm()
        if norm > cfg.clip_norm:
            grads.scale(cfg.clip_norm / norm)

    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t

    _adam_update(params.U, state.m["U"], state.v["U"], grads.dU, cfg, c1, c2, rows=grads.user_rows)
    _adam_update(params.V, state.m["V"], state.v["V"], grads.dV, cfg, c1, c2, rows=grads.item_rows)
    _adam_update(params.W1, state.m["W1"], state.v["W1"], grads.dW1, cfg, c1, c2)
    _adam_update(params.b1, state.m["b1"], state.v["b1"], grads.db1, cfg, c1, c2)
    _adam_update(params.w2, state.m["w2"], state.v["w2"], grads.dw2, cfg, c1, c2)
    _adam_update(params.b2, state.m["b2"], state.v["b2"], grads.db2, cfg, c1, c2)
    return params, state


def train(
    ds: Dataset,
    mcfg: ModelConfig,
    ocfg: ObjectiveSpec,
    tcfg: TrainConfig,
    checkpoint_path=None,
    log_path=None,
    validate: Optional[Callable[[ModelParams], float]] = None,
):
    """Run `tcfg.epochs` iterations of sample -> forward -> backward -> adam_step."""
    params = model.init(mcfg, ds.n_users, ds.n_items)
    params.scorer = model.scorer_for(ocfg.variant)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(tcfg.seed)
    log = TrainingLog()
    window = tcfg.log_every or get_progress_window(tcfg.epochs)

    logger.info(f"Training variant={ocfg.variant.value} k={mcfg.embed_dim} h={mcfg.hidden_units} "
                f"T={tcfg.epochs} n={tcfg.batch_size} on {len(ds.eligible_users)} users")

    handle = open(log_path, "w") if log_path is not None else None
    try:
        for iteration in range(1, tcfg.epochs + 1):
            batch = sample_batch(ds, tcfg.batch_size, rng)
            loss, grads = model.backward(params, batch, ocfg)
            adam_step(params, grads, state, tcfg)

            val_map = None
            if tcfg.eval_every and iteration % tcfg.eval_every == 0:
                if validate is not None:
                    val_map = validate(params)
                if checkpoint_path is not None:
                    model.save_checkpoint(checkpoint_path, params, mcfg)
            log.append(iteration, loss, val_map)
            if handle is not None:
                handle.write(log.line(len(log.iterations) - 1))

            if iteration % window == 0:
                message = f"[{iteration}/{tcfg.epochs}] median loss {log.window_median(iteration - window, window):.6f}"
                if val_map is not None:
                    message += f" test MAP@1 {val_map:.4f}"
                logger.progress(message)
    except KeyboardInterrupt:
        if checkpoint_path is not None:
            model.save_checkpoint(checkpoint_path, params, mcfg)
            logger.warning(f"Interrupted at iteration {state.t}; parameters saved to {checkpoint_path}")
        raise
    finally:
        if handle is not None:
            handle.close()

    if checkpoint_path is not None:
        model.save_checkpoint(checkpoint_path, params, mcfg)
    return params, log
