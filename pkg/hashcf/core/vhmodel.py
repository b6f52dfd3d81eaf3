"""
Variational hashing model for collaborative filtering.

Users and items are encoded by embedding tables whose sigmoid gives the
per-bit probability of a +1. Codes are sampled by thresholding those
probabilities, the rating is reconstructed from the (projected) Hamming
dissimilarity through a fixed decreasing affine map, and training minimises
the squared rating error plus a KL term towards the uniform Bernoulli prior.
Sampling is made trainable with the straight-through estimator: the forward
pass uses the sampled +/-1 bits, the backward pass differentiates the smooth
surrogate 2*sigmoid(E) - 1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import torch
from torch import nn

from .bitcode import CodeMatrix, HashCode, NegatedItemStore, hamming, phd
from .config import TrainConfig
from .errors import ConfigurationError, DimensionError, EntityLookupError, InvalidInputError
from .instrumentation import BatchTimer, trace
from .stopping import DivergenceGuard, EarlyStopping
from .utils import make_generator, torch_dtype
from hashcf.eval.metrics import evaluate
from hashcf.storage.metric_storage import TrainingLog

logger = logging.getLogger(__name__)

PROB_EPS = 1e-7


@dataclass
class EncoderParams:
    """Real-valued user and item embedding tables, one row per entity, m columns."""
    user_table: np.ndarray
    item_table: np.ndarray

    def __post_init__(self):
        if self.user_table.ndim != 2 or self.item_table.ndim != 2:
            raise InvalidInputError("embedding tables must be 2-D")
        if self.user_table.shape[1] != self.item_table.shape[1]:
            raise DimensionError(f"user/item tables disagree on m: {self.user_table.shape[1]} vs {self.item_table.shape[1]}")
        if not (np.isfinite(self.user_table).all() and np.isfinite(self.item_table).all()):
            raise InvalidInputError("embedding tables must be finite")

    @property
    def m(self) -> int:
        return self.user_table.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_table.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_table.shape[0]

    def table(self, kind: str) -> np.ndarray:
        if kind == "user":
            return self.user_table
        if kind == "item":
            return self.item_table
        raise InvalidInputError(f"entity kind must be 'user' or 'item', got '{kind}'")


@dataclass(frozen=True)
class SamplingPolicy:
    mode: str = "deterministic"

    def __post_init__(self):
        if self.mode not in ("stochastic", "deterministic"):
            raise ConfigurationError(f"unknown sampling mode '{self.mode}'")

    @property
    def stochastic(self) -> bool:
        return self.mode == "stochastic"


DETERMINISTIC = SamplingPolicy("deterministic")
STOCHASTIC = SamplingPolicy("stochastic")


@dataclass(frozen=True)
class AffineRatingMap:
    """
    g(d) = r_max - d * (r_max - r_min) / m.

    Dissimilarity 0 maps to the highest rating and m to the lowest, for PHD
    and Hamming alike.
    """
    r_min: float
    r_max: float
    m: int

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ConfigurationError("r_min must be below r_max")
        if self.m < 1:
            raise ConfigurationError("m must be positive")

    @property
    def slope(self) -> float:
        return (self.r_max - self.r_min) / self.m

    def __call__(self, dissimilarity):
        return self.r_max - dissimilarity * self.slope


@dataclass
class NoiseSchedule:
    """Gaussian rating noise whose variance decays geometrically per training iteration."""
    initial_variance: float = 1.0
    decay: float = 1.0 - 1e-4
    step_count: int = 0

    @property
    def variance(self) -> float:
        return self.initial_variance * self.decay ** self.step_count

    def step(self):
        self.step_count += 1

    def sample(self, shape, generator: torch.Generator, dtype=torch.float32) -> torch.Tensor:
        variance = self.variance
        if variance <= 0:
            return torch.zeros(shape, dtype=dtype)
        return torch.randn(shape, generator=generator, dtype=dtype) * math.sqrt(variance)


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return torch.sigmoid(torch.as_tensor(values, dtype=torch.float64)).numpy()


def encode_probs(params: EncoderParams, kind: str, index: int) -> np.ndarray:
    """Per-bit probabilities sigmoid(E[index]) for a user or item."""
    table = params.table(kind)
    if not 0 <= index < table.shape[0]:
        raise EntityLookupError(f"{kind} {index} out of range [0, {table.shape[0]})")
    return _sigmoid(table[index])


def _bits_from_probs(probs: np.ndarray, policy: SamplingPolicy, rng: Optional[np.random.Generator]) -> np.ndarray:
    if policy.stochastic:
        rng = rng if rng is not None else np.random.default_rng()
        return probs > rng.random(probs.shape)
    return probs > 0.5


def sample_code(probs: np.ndarray, policy: SamplingPolicy = DETERMINISTIC,
                rng: Optional[np.random.Generator] = None) -> HashCode:
    """
    Sample a code from per-bit probabilities.

    Deterministic: bit j is set iff probs[j] > 0.5. Stochastic: bit j is set iff
    probs[j] exceeds a fresh Uniform[0, 1] threshold.
    """
    probs = np.asarray(probs, dtype=np.float64)
    return CodeMatrix.from_bits(_bits_from_probs(probs, policy, rng)[None, :])[0]


def reconstruct_rating(z_u: HashCode, z_i: HashCode, rating_map: AffineRatingMap, kind: str = "phd") -> float:
    if z_u.m != rating_map.m:
        raise DimensionError(f"code length {z_u.m} does not match the rating map's {rating_map.m}")
    if kind == "phd":
        d = phd(z_u, z_i)
    elif kind == "hamming":
        d = hamming(z_u, z_i)
    else:
        raise ConfigurationError(f"unknown dissimilarity '{kind}'")
    return float(rating_map(d))


def kl_bits(probs: torch.Tensor) -> torch.Tensor:
    """KL(Bernoulli(p) || Bernoulli(0.5)) summed over the last axis."""
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return (p * torch.log(2 * p) + (1 - p) * torch.log(2 * (1 - p))).sum(dim=-1)


def kl_term(probs) -> float:
    return float(kl_bits(torch.as_tensor(np.asarray(probs), dtype=torch.float64)))


def surrogate_dissimilarity(z_u: torch.Tensor, z_i: torch.Tensor, kind: str) -> torch.Tensor:
    """
    Dissimilarity over +/-1 (or relaxed) code values; exact at the +/-1 corners.

    phd:     sum_j (1 + u_j)(1 - i_j) / 4   (u AND NOT i)
    hamming: sum_j (1 - u_j * i_j) / 2      (u XOR i)
    """
    if kind == "phd":
        return ((1 + z_u) * (1 - z_i) / 4).sum(dim=-1)
    if kind == "hamming":
        return ((1 - z_u * z_i) / 2).sum(dim=-1)
    raise ConfigurationError(f"unknown dissimilarity '{kind}'")


class VariationalHashingModel(nn.Module):
    def __init__(self, n_users: int, n_items: int, config: TrainConfig, rating_map: AffineRatingMap,
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        if rating_map.m != config.bits:
            raise DimensionError(f"rating map expects {rating_map.m} bits, config has {config.bits}")
        self.config = config
        self.rating_map = rating_map
        dtype = torch_dtype(config.dtype)
        self.user_embedding = nn.Embedding(n_users, config.bits, dtype=dtype)
        self.item_embedding = nn.Embedding(n_items, config.bits, dtype=dtype)
        generator = generator if generator is not None else make_generator(config.seed)
        with torch.no_grad():
            for embedding in (self.user_embedding, self.item_embedding):
                embedding.weight.copy_(torch.randn(embedding.weight.shape, generator=generator, dtype=dtype) * config.init_std)

    @classmethod
    def from_params(cls, params: EncoderParams, config: TrainConfig, rating_map: AffineRatingMap) -> "VariationalHashingModel":
        if params.m != config.bits:
            raise DimensionError(f"params have {params.m} bits, config has {config.bits}")
        model = cls(params.n_users, params.n_items, config, rating_map, generator=make_generator(0))
        model.load_params(params)
        return model

    def load_params(self, params: EncoderParams):
        dtype = torch_dtype(self.config.dtype)
        with torch.no_grad():
            self.user_embedding.weight.copy_(torch.as_tensor(params.user_table, dtype=dtype))
            self.item_embedding.weight.copy_(torch.as_tensor(params.item_table, dtype=dtype))

    def params(self) -> EncoderParams:
        return EncoderParams(self.user_embedding.weight.detach().cpu().numpy().copy(),
                             self.item_embedding.weight.detach().cpu().numpy().copy())

    def check_ids(self, users: torch.Tensor, items: torch.Tensor):
        for kind, ids, size in (("user", users, self.user_embedding.num_embeddings),
                                ("item", items, self.item_embedding.num_embeddings)):
            if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= size):
                bad = ids[(ids < 0) | (ids >= size)][0]
                raise EntityLookupError(f"{kind} {int(bad)} out of range [0, {size})")

    def codes(self, probs: torch.Tensor, policy: SamplingPolicy, generator: Optional[torch.Generator],
              straight_through: bool = True) -> torch.Tensor:
        soft = 2 * probs - 1
        if not straight_through:
            return soft
        if policy.stochastic:
            threshold = torch.rand(probs.shape, generator=generator, dtype=probs.dtype)
        else:
            threshold = torch.full_like(probs, 0.5)
        hard = 2 * (probs > threshold).to(probs.dtype) - 1
        return soft + (hard - soft).detach()

    def batch_loss(self, users: torch.Tensor, items: torch.Tensor, ratings: torch.Tensor, kl_weight: float,
                   noise: Optional[torch.Tensor] = None, policy: SamplingPolicy = DETERMINISTIC,
                   generator: Optional[torch.Generator] = None,
                   straight_through: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Mean over the batch of (R + noise - g(d(z_u, z_i)))^2 + beta * (KL_u + KL_i).

        Returns:
            (loss, squared error mean) as tensors; only `loss` carries the KL part.
        """
        p_u = torch.sigmoid(self.user_embedding(users))
        p_i = torch.sigmoid(self.item_embedding(items))
        z_u = self.codes(p_u, policy, generator, straight_through)
        z_i = self.codes(p_i, policy, generator, straight_through)
        predicted = self.rating_map(surrogate_dissimilarity(z_u, z_i, self.config.dissimilarity))
        target = ratings if noise is None else ratings + noise
        squared = (target - predicted) ** 2
        loss = (squared + kl_weight * (kl_bits(p_u) + kl_bits(p_i))).mean()
        return loss, squared.mean()

    def clamp_(self, bound: float):
        with torch.no_grad():
            self.user_embedding.weight.clamp_(-bound, bound)
            self.item_embedding.weight.clamp_(-bound, bound)


def _batch_tensors(batch, dtype) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    if hasattr(batch, "columns"):
        users, items, ratings = batch["user"].to_numpy(), batch["item"].to_numpy(), batch["rating"].to_numpy()
    else:
        users, items, ratings = (np.asarray(column) for column in batch)
    return (torch.as_tensor(np.asarray(users, dtype=np.int64)), torch.as_tensor(np.asarray(items, dtype=np.int64)),
            torch.as_tensor(np.asarray(ratings, dtype=np.float64), dtype=dtype))


def batch_loss_and_grads(batch, params: EncoderParams, config: TrainConfig, rating_map: AffineRatingMap,
                         noise: Optional[NoiseSchedule] = None, rng: Union[None, int, torch.Generator] = None,
                         kl_weight: Optional[float] = None,
                         straight_through: bool = True) -> Tuple[float, EncoderParams]:
    """
    Loss of one batch and its gradients with respect to both embedding tables.

    Args:
        batch: A frame with user/item/rating columns, or a (users, items, ratings) triple.
        params (EncoderParams): Current embedding tables.
        config (TrainConfig): Supplies m, the dissimilarity, the training sampling policy and beta.
        rating_map (AffineRatingMap): The fixed map g.
        noise (NoiseSchedule): Rating noise at its current variance; None for clean targets.
        rng: Seed or generator for stochastic thresholds and noise.
        kl_weight (float): Overrides config.kl_weight (used for warm-up).
        straight_through (bool): False evaluates the fully relaxed surrogate loss.

    Returns:
        (loss value, gradient tables shaped like params)
    """
    dtype = torch_dtype(config.dtype)
    users, items, ratings = _batch_tensors(batch, dtype)
    if users.numel() == 0:
        raise InvalidInputError("batch is empty")
    generator = rng if isinstance(rng, torch.Generator) else make_generator(rng if rng is not None else config.seed)
    model = VariationalHashingModel.from_params(params, config, rating_map)
    model.check_ids(users, items)
    beta = config.kl_weight if kl_weight is None else kl_weight
    sampled_noise = noise.sample(ratings.shape, generator, dtype) if noise is not None else None
    loss, _ = model.batch_loss(users, items, ratings, beta, sampled_noise,
                               SamplingPolicy(config.train_sampling), generator, straight_through)
    loss.backward()
    grads = EncoderParams(model.user_embedding.weight.grad.numpy().copy(),
                          model.item_embedding.weight.grad.numpy().copy())
    return float(loss.detach()), grads


@dataclass
class ExportedCodes:
    users: CodeMatrix
    items: CodeMatrix
    negated_items: NegatedItemStore


def export_codes(params: EncoderParams, policy: SamplingPolicy = DETERMINISTIC,
                 rng: Optional[np.random.Generator] = None) -> ExportedCodes:
    """Hash codes for every user and item; deterministic thresholding by default."""
    users = CodeMatrix.from_bits(_bits_from_probs(_sigmoid(params.user_table), policy, rng))
    items = CodeMatrix.from_bits(_bits_from_probs(_sigmoid(params.item_table), policy, rng))
    return ExportedCodes(users, items, NegatedItemStore.from_items(items))


@dataclass
class TrainResult:
    params: EncoderParams
    log: TrainingLog
    best_epoch: Optional[int]
    best_ndcg: float
    best_val_loss: float
    iterations: int
    mean_batch_seconds: float
    noise_variance: float
    config: TrainConfig = field(repr=False, default=None)


def rating_map_for(dataset, bits: int) -> AffineRatingMap:
    return AffineRatingMap(dataset.rating_min, dataset.rating_max, bits)


def validation_scores(params: EncoderParams, dataset, config: TrainConfig, rating_map: AffineRatingMap,
                      split: str = "validation") -> Tuple[float, float]:
    """(NDCG@eval_k, reconstruction MSE) of deterministic codes on a split; NaN when the split is empty."""
    frame = dataset.split(split)
    if len(frame) == 0:
        return math.nan, math.nan
    codes = export_codes(params)
    users = frame["user"].to_numpy()
    items = frame["item"].to_numpy()
    if config.dissimilarity == "phd":
        words = codes.users.words[users] & codes.negated_items.codes.words[items]
        items_repr = codes.negated_items
    else:
        words = codes.users.words[users] ^ codes.items.words[items]
        items_repr = codes.items
    predicted = rating_map(np.bitwise_count(words).sum(axis=1, dtype=np.int64).astype(np.float64))
    mse = float(np.mean((frame["rating"].to_numpy(dtype=np.float64) - predicted) ** 2))
    report = evaluate(codes.users, items_repr, dataset, config.dissimilarity, split=split, ks=(config.eval_k,))
    return report.aggregates.get(f"ndcg{config.eval_k}", math.nan), mse


def train(dataset, config: TrainConfig, timer: Optional[BatchTimer] = None) -> TrainResult:
    """
    Train the variational hashing model with Adam over shuffled mini-batches.

    Rating noise starts at `config.noise_variance` and decays by
    `config.noise_decay` every iteration; beta warms up linearly over the first
    `kl_warmup_fraction` of all iterations; embeddings are clamped to
    [-clamp, clamp] after every step. After each epoch the deterministic codes
    are scored on the validation split and the best checkpoint (highest
    NDCG@eval_k, lower validation loss on ties) is returned.
    """
    train_frame = dataset.train
    if len(train_frame) == 0:
        raise ConfigurationError("training split is empty")
    dtype = torch_dtype(config.dtype)
    generator = make_generator(config.seed)
    rating_map = rating_map_for(dataset, config.bits)
    model = VariationalHashingModel(dataset.n_users, dataset.n_items, config, rating_map, generator)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    noise = NoiseSchedule(config.noise_variance, config.noise_decay)
    policy = SamplingPolicy(config.train_sampling)
    guard = DivergenceGuard()
    stopper = EarlyStopping(config.patience)
    log = TrainingLog()
    timer = timer if timer is not None else BatchTimer()

    users, items, ratings = _batch_tensors(train_frame, dtype)
    model.check_ids(users, items)
    n = users.shape[0]
    batches_per_epoch = math.ceil(n / config.batch_size)
    warmup = config.kl_warmup_fraction * config.epochs * batches_per_epoch

    def step(batch_users, batch_items, batch_ratings, beta):
        optimizer.zero_grad()
        loss, _ = model.batch_loss(batch_users, batch_items, batch_ratings, beta,
                                   noise.sample(batch_ratings.shape, generator, dtype), policy, generator)
        loss.backward()
        optimizer.step()
        model.clamp_(config.clamp)
        return loss.detach()

    step = trace(timer, "batch")(step)
    best_params = model.params()
    iteration = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, config.batch_size):
            index = order[start:start + config.batch_size]
            beta = config.kl_weight * min(1.0, iteration / warmup) if warmup > 0 else config.kl_weight
            loss = step(users[index], items[index], ratings[index], beta)
            guard.check(loss, epoch, iteration)
            total += float(loss) * index.shape[0]
            noise.step()
            iteration += 1
            logger.debug("epoch %d iteration %d loss %.6f", epoch, iteration, float(loss))
        train_loss = total / n

        params = model.params()
        val_ndcg, val_loss = validation_scores(params, dataset, config, rating_map)
        log.add(epoch, train_loss, val_loss, val_ndcg, noise.variance)
        score = 0.0 if math.isnan(val_ndcg) else val_ndcg
        if stopper.update(epoch, score, train_loss if math.isnan(val_loss) else val_loss):
            best_params = params
        logger.info("epoch %d: train_loss=%.5f val_loss=%.5f val_ndcg%d=%.5f noise_var=%.5f",
                    epoch, train_loss, val_loss, config.eval_k, val_ndcg, noise.variance)
        if stopper.should_stop:
            logger.warning("Early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    return TrainResult(best_params, log, stopper.best_epoch, stopper.best_ndcg, stopper.best_loss, iteration,
                       timer.mean("batch"), noise.variance, config)
