"""
Real-valued matrix factorization and its per-dimension binary quantizations.

MF predicts a rating by the inner product of a user and an item vector whose
dimension equals the number of code bits of the hashing models it is compared
against. MF-mean / MF-median threshold each dimension of the learned tables at
its mean / median to obtain hash codes.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from .bitcode import CodeMatrix
from .config import MFConfig
from .errors import ConfigurationError, DimensionError, EntityLookupError, InvalidInputError
from .instrumentation import BatchTimer, trace
from .stopping import DivergenceGuard, EarlyStopping
from .utils import make_generator, torch_dtype
from hashcf.eval.metrics import evaluate
from hashcf.storage.metric_storage import TrainingLog

logger = logging.getLogger(__name__)

QUANTIZE_STATISTICS = ("mean", "median")
L2_GRID = (1e-4, 1e-3, 1e-2)


@dataclass
class MFParams:
    user_vectors: np.ndarray
    item_vectors: np.ndarray
    user_bias: Optional[np.ndarray] = None
    item_bias: Optional[np.ndarray] = None
    global_bias: float = 0.0

    def __post_init__(self):
        if self.user_vectors.ndim != 2 or self.item_vectors.ndim != 2:
            raise InvalidInputError("factor tables must be 2-D")
        if self.user_vectors.shape[1] != self.item_vectors.shape[1]:
            raise DimensionError(f"user/item factors disagree on d: {self.user_vectors.shape[1]} vs {self.item_vectors.shape[1]}")
        for table in (self.user_vectors, self.item_vectors, self.user_bias, self.item_bias):
            if table is not None and not np.isfinite(table).all():
                raise InvalidInputError("factor tables must be finite")

    @property
    def d(self) -> int:
        return self.user_vectors.shape[1]

    @property
    def has_bias(self) -> bool:
        return self.user_bias is not None

    def tables(self) -> Dict[str, np.ndarray]:
        tables = {"user_vectors": self.user_vectors, "item_vectors": self.item_vectors}
        if self.has_bias:
            tables.update(user_bias=self.user_bias[:, None], item_bias=self.item_bias[:, None],
                          global_bias=np.array([[self.global_bias]], dtype=np.float32))
        return tables

    @classmethod
    def from_tables(cls, tables: Dict[str, np.ndarray]) -> "MFParams":
        if "user_bias" in tables:
            return cls(tables["user_vectors"], tables["item_vectors"], tables["user_bias"][:, 0],
                       tables["item_bias"][:, 0], float(tables["global_bias"][0, 0]))
        return cls(tables["user_vectors"], tables["item_vectors"])

    def user_scores(self, user: int) -> np.ndarray:
        """Predicted score of every item for one user."""
        scores = self.item_vectors.astype(np.float64) @ self.user_vectors[user].astype(np.float64)
        if self.has_bias:
            scores = scores + self.item_bias + self.user_bias[user] + self.global_bias
        return scores


class MatrixFactorization(nn.Module):
    def __init__(self, n_users: int, n_items: int, config: MFConfig, global_bias: float = 0.0,
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        self.config = config
        dtype = torch_dtype(config.dtype)
        self.user_factors = nn.Embedding(n_users, config.dim, dtype=dtype)
        self.item_factors = nn.Embedding(n_items, config.dim, dtype=dtype)
        generator = generator if generator is not None else make_generator(config.seed)
        with torch.no_grad():
            for embedding in (self.user_factors, self.item_factors):
                embedding.weight.copy_(torch.randn(embedding.weight.shape, generator=generator, dtype=dtype) * config.init_std)
        if config.use_bias:
            self.user_bias = nn.Embedding(n_users, 1, dtype=dtype)
            self.item_bias = nn.Embedding(n_items, 1, dtype=dtype)
            nn.init.zeros_(self.user_bias.weight)
            nn.init.zeros_(self.item_bias.weight)
        self.global_bias = global_bias

    def forward(self, users: torch.Tensor, items: torch.Tensor) -> torch.Tensor:
        prediction = (self.user_factors(users) * self.item_factors(items)).sum(dim=-1)
        if self.config.use_bias:
            prediction = prediction + self.user_bias(users)[:, 0] + self.item_bias(items)[:, 0] + self.global_bias
        return prediction

    def penalty(self, users: torch.Tensor, items: torch.Tensor) -> torch.Tensor:
        """Per-rating ||p_u||^2 + ||q_i||^2."""
        return (self.user_factors(users) ** 2).sum(dim=-1) + (self.item_factors(items) ** 2).sum(dim=-1)

    def params(self) -> MFParams:
        user = self.user_factors.weight.detach().numpy().copy()
        item = self.item_factors.weight.detach().numpy().copy()
        if not self.config.use_bias:
            return MFParams(user, item)
        return MFParams(user, item, self.user_bias.weight.detach().numpy()[:, 0].copy(),
                        self.item_bias.weight.detach().numpy()[:, 0].copy(), float(self.global_bias))


@dataclass
class MFResult:
    params: MFParams
    log: TrainingLog
    best_epoch: Optional[int]
    best_ndcg: float
    best_val_loss: float
    mean_batch_seconds: float
    config: MFConfig = None


def _predict_frame(params: MFParams, frame) -> np.ndarray:
    users = frame["user"].to_numpy()
    items = frame["item"].to_numpy()
    predicted = np.einsum("ij,ij->i", params.user_vectors[users].astype(np.float64),
                          params.item_vectors[items].astype(np.float64))
    if params.has_bias:
        predicted += params.user_bias[users] + params.item_bias[items] + params.global_bias
    return predicted


def _validation_scores(params: MFParams, dataset, eval_k: int) -> Tuple[float, float]:
    frame = dataset.validation
    if len(frame) == 0:
        return math.nan, math.nan
    mse = float(np.mean((frame["rating"].to_numpy(dtype=np.float64) - _predict_frame(params, frame)) ** 2))
    report = evaluate_mf(params, dataset, split="validation", ks=(eval_k,))
    return report.aggregates.get(f"ndcg{eval_k}", math.nan), mse


def mf_train(dataset, config: MFConfig, timer: Optional[BatchTimer] = None) -> MFResult:
    """
    Fit MF by Adam on shuffled mini-batches of the training ratings.

    Minimises mean((R - <p_u, q_i>)^2) + l2 * mean(||p_u||^2 + ||q_i||^2) over
    each batch and keeps the epoch with the best validation NDCG@eval_k (ties:
    lower validation MSE).
    """
    frame = dataset.train
    if len(frame) == 0:
        raise ConfigurationError("training split is empty")
    dtype = torch_dtype(config.dtype)
    generator = make_generator(config.seed)
    global_bias = float(frame["rating"].mean()) if config.use_bias else 0.0
    model = MatrixFactorization(dataset.n_users, dataset.n_items, config, global_bias, generator)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    guard = DivergenceGuard()
    stopper = EarlyStopping(config.patience)
    log = TrainingLog()
    timer = timer if timer is not None else BatchTimer()

    users = torch.as_tensor(frame["user"].to_numpy(dtype=np.int64))
    items = torch.as_tensor(frame["item"].to_numpy(dtype=np.int64))
    ratings = torch.as_tensor(frame["rating"].to_numpy(dtype=np.float64), dtype=dtype)
    if int(users.max()) >= dataset.n_users or int(items.max()) >= dataset.n_items:
        raise EntityLookupError("training split references ids beyond the dataset size")
    n = users.shape[0]

    @trace(timer, "batch")
    def step(batch_users, batch_items, batch_ratings):
        optimizer.zero_grad()
        error = (batch_ratings - model(batch_users, batch_items)) ** 2
        loss = (error + config.l2 * model.penalty(batch_users, batch_items)).mean()
        loss.backward()
        optimizer.step()
        return loss.detach()

    best_params = model.params()
    iteration = 0
    for epoch in range(1, config.epochs + 1):
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, config.batch_size):
            index = order[start:start + config.batch_size]
            loss = step(users[index], items[index], ratings[index])
            guard.check(loss, epoch, iteration)
            total += float(loss) * index.shape[0]
            iteration += 1
        train_loss = total / n
        params = model.params()
        val_ndcg, val_loss = _validation_scores(params, dataset, config.eval_k)
        log.add(epoch, train_loss, val_loss, val_ndcg, 0.0)
        score = 0.0 if math.isnan(val_ndcg) else val_ndcg
        if stopper.update(epoch, score, train_loss if math.isnan(val_loss) else val_loss):
            best_params = params
        logger.info("mf epoch %d: train_loss=%.5f val_mse=%.5f val_ndcg%d=%.5f",
                    epoch, train_loss, val_loss, config.eval_k, val_ndcg)
        if stopper.should_stop:
            logger.warning("Early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break
    return MFResult(best_params, log, stopper.best_epoch, stopper.best_ndcg, stopper.best_loss,
                    timer.mean("batch"), config)


def mf_predict(params: MFParams, u: int, i: int) -> float:
    if not 0 <= u < params.user_vectors.shape[0]:
        raise EntityLookupError(f"user {u} out of range [0, {params.user_vectors.shape[0]})")
    if not 0 <= i < params.item_vectors.shape[0]:
        raise EntityLookupError(f"item {i} out of range [0, {params.item_vectors.shape[0]})")
    value = float(np.dot(params.user_vectors[u].astype(np.float64), params.item_vectors[i].astype(np.float64)))
    if params.has_bias:
        value += float(params.user_bias[u] + params.item_bias[i]) + params.global_bias
    return value


def evaluate_mf(params: MFParams, dataset, split: str = "test", ks: Sequence[int] = (5, 10), **metadata):
    """Inner-product evaluation; bias terms are folded into extra vector dimensions."""
    users, items = params.user_vectors.astype(np.float64), params.item_vectors.astype(np.float64)
    if params.has_bias:
        ones_u, ones_i = np.ones((users.shape[0], 1)), np.ones((items.shape[0], 1))
        users = np.hstack([users, params.user_bias[:, None] + params.global_bias, ones_u])
        items = np.hstack([items, ones_i, params.item_bias[:, None]])
    metadata.setdefault("m", params.d)
    return evaluate(users, items, dataset, "inner-product", split=split, ks=ks, **metadata)


def _thresholds(table: np.ndarray, statistic: str) -> np.ndarray:
    if statistic == "mean":
        return table.mean(axis=0)
    return np.median(table, axis=0)


def quantize(params: MFParams, statistic: str = "mean", pooled: bool = False) -> Tuple[CodeMatrix, CodeMatrix]:
    """
    Binarize each dimension j at threshold tau_j: bit = 1 iff value > tau_j.

    Args:
        params (MFParams): Trained factors.
        statistic (str): 'mean' or 'median'.
        pooled (bool): Compute tau over users and items together instead of per table.

    Returns:
        (user codes, item codes)
    """
    if statistic not in QUANTIZE_STATISTICS:
        raise ConfigurationError(f"statistic must be one of {QUANTIZE_STATISTICS}")
    users = params.user_vectors.astype(np.float64)
    items = params.item_vectors.astype(np.float64)
    if pooled:
        tau = _thresholds(np.vstack([users, items]), statistic)
        tau_users = tau_items = tau
    else:
        tau_users, tau_items = _thresholds(users, statistic), _thresholds(items, statistic)
    return CodeMatrix.from_bits(users > tau_users), CodeMatrix.from_bits(items > tau_items)


def tune_l2(dataset, config: MFConfig, grid: Sequence[float] = L2_GRID) -> Tuple[float, MFResult, Dict[float, float]]:
    """Train one MF per L2 weight and keep the best validation NDCG (ties: lower validation loss)."""
    if not grid:
        raise ConfigurationError("l2 grid is empty")
    selector = EarlyStopping(None)
    scores, best = {}, None
    for l2 in grid:
        candidate = MFConfig(**{**config.to_dict(), "l2": l2})
        result = mf_train(dataset, candidate)
        scores[l2] = result.best_ndcg
        logger.info("l2=%g: best validation NDCG@%d %.5f", l2, candidate.eval_k, result.best_ndcg)
        if selector.update(len(scores), result.best_ndcg, result.best_val_loss):
            best = (l2, result)
    return best[0], best[1], scores
