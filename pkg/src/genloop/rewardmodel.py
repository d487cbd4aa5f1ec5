"""The reward model: a dense regressor over fixed triplet features
whose output is squashed into the reward range."""
import logging
import pathlib
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import neuralcore
from genloop import synthworld
from genloop.neuralcore import tensor
from genloop.synthworld import answer as answer_
from genloop.synthworld import image as image_
from genloop.synthworld import oracle
from genloop.synthworld import vocab

logger = logging.getLogger(__name__)

SCORE_LOW = -6.0
SCORE_HIGH = 10.0
GRID_FEATURES = image_.GRID * image_.GRID * image_.CELL_STATES
FEATURE_DIM = GRID_FEATURES + 2 * len(vocab.VOCAB) + 3
"""grid cells x cell states + question bag + answer bag + 3 structural."""


class ScoredExample(t.Protocol):
    """Anything carrying a triplet and its regression target."""

    @property
    def triplet(self) -> synthworld.VqaTriplet:
        ...

    @property
    def target_score(self) -> float:
        ...


class RewardConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    hidden: tuple[int, ...] = (64, 64)
    epochs: int = pydantic.Field(default=200, gt=0)
    batch_size: int = pydantic.Field(default=64, gt=0)
    lr: float = pydantic.Field(default=2e-3, gt=0)
    max_answer_len: int = pydantic.Field(default=24, gt=0)
    """Normalizer of the answer length feature."""
    update_epochs: int = pydantic.Field(default=20, gt=0)
    """Epochs of each continual update inside the loop."""


class PreferenceRecord(pydantic.BaseModel):
    """A policy answer with a target derived from the oracle."""
    model_config = pydantic.ConfigDict(frozen=True)

    triplet: synthworld.VqaTriplet
    target_score: float = pydantic.Field(ge=SCORE_LOW, le=SCORE_HIGH)
    iteration: int = pydantic.Field(default=0, ge=0)


def featurize(
    item: synthworld.VqaTriplet,
    max_answer_len: int = 24,
) -> np.ndarray:
    """Encode a triplet as a fixed length vector of `FEATURE_DIM` entries.

    Raises:
        errors.DataError: naming the first out-of-vocabulary token.
    """
    features = np.zeros(FEATURE_DIM, dtype=np.float32)
    cells = item.image.grid.reshape(-1)
    features[np.arange(cells.size) * image_.CELL_STATES + cells] = 1.0
    offset = GRID_FEATURES
    for token_id in vocab.VOCAB.ids(item.question.tokens):
        features[offset + token_id] += 1.0
    offset += len(vocab.VOCAB)
    for token_id in vocab.VOCAB.ids(item.answer):
        features[offset + token_id] += 1.0
    offset += len(vocab.VOCAB)
    features[offset] = float(answer_.has_think_span(item.answer))
    features[offset + 1] = float(answer_.has_ans_span(item.answer))
    features[offset + 2] = len(item.answer) / max_answer_len
    return features


def featurize_batch(
    items: t.Sequence[synthworld.VqaTriplet],
    max_answer_len: int = 24,
) -> np.ndarray:
    return np.stack([featurize(i, max_answer_len) for i in items])


def squash(head: tensor.Tensor) -> tensor.Tensor:
    """Map a real head output into (-6, 10)."""
    return SCORE_LOW + (SCORE_HIGH - SCORE_LOW) * tensor.sigmoid(head)


class RewardNet:
    """Parameters and architecture of the reward model."""

    def __init__(
        self,
        params: neuralcore.ParamSet,
        config: RewardConfig | None = None,
    ) -> None:
        self.params = params
        self.config = config or RewardConfig()
        self.spec = neuralcore.LayerSpec.model_validate(
            params.descriptor['layers'])

    @classmethod
    def create(cls, config: RewardConfig, seed: int) -> 'RewardNet':
        spec = neuralcore.LayerSpec(
            widths=(FEATURE_DIM, *config.hidden, 1),
            activations=('tanh',) * len(config.hidden) + ('linear',),
            prefix='rm',
        )
        rng = np.random.default_rng([seed, 0x52])
        params = neuralcore.ParamSet(
            neuralcore.init_mlp(spec, rng),
            {'kind': 'reward', 'layers': spec.model_dump(mode='json')})
        return cls(params, config)

    def copy(self) -> 'RewardNet':
        return RewardNet(self.params.copy(), self.config)

    def forward(self, features: np.ndarray) -> tensor.Tensor:
        """Scores of a `(batch, FEATURE_DIM)` matrix, shape `(batch,)`."""
        head = neuralcore.mlp_forward(self.params, features, self.spec)
        return squash(head).reshape(features.shape[0])

    def save(self, path: str | pathlib.Path) -> str:
        return neuralcore.save_checkpoint(path, self.params)

    @classmethod
    def load(
        cls,
        path: str | pathlib.Path,
        config: RewardConfig | None = None,
    ) -> 'RewardNet':
        params = neuralcore.load_checkpoint(path)
        if params.descriptor.get('kind') != 'reward':
            raise errors.DataError(f'{path} is not a reward checkpoint')
        return cls(params, config)


def score_batch(
    net: RewardNet,
    items: t.Sequence[synthworld.VqaTriplet],
) -> np.ndarray:
    if not items:
        return np.zeros(0, dtype=np.float32)
    features = featurize_batch(items, net.config.max_answer_len)
    scores = net.forward(features).data
    # float32 sigmoid saturates at exactly 0 or 1; keep the interval open.
    low = np.nextafter(np.float32(SCORE_LOW), np.float32(0))
    high = np.nextafter(np.float32(SCORE_HIGH), np.float32(0))
    return np.clip(scores, low, high)


def score(net: RewardNet, item: synthworld.VqaTriplet) -> float:
    """Reward score of a triplet, strictly inside (-6, 10)."""
    return float(score_batch(net, [item])[0])


def rm_loss(
    net: RewardNet,
    features: np.ndarray,
    targets: np.ndarray,
) -> tensor.Tensor:
    """Mean squared error between scores and targets."""
    scores = net.forward(features)
    residual = scores - tensor.Tensor(targets.astype(scores.data.dtype))
    return tensor.square(residual).mean()


def train_rm(
    net: RewardNet,
    corpus: t.Sequence[ScoredExample],
    epochs: int,
    lr: float,
    seed: int,
) -> tuple[RewardNet, list[float]]:
    """Minimize the squared error to the target scores with Adam.

    Returns:
        A trained copy of `net` and the mean training loss of every epoch.

    Raises:
        errors.ContractError: when the corpus is empty.
        errors.TrainingError: on a non-finite loss.
    """
    if not corpus:
        raise errors.ContractError('reward corpus is empty')
    trained = net.copy()
    features = featurize_batch(
        [e.triplet for e in corpus], trained.config.max_answer_len)
    targets = np.array([e.target_score for e in corpus], dtype=np.float32)
    rng = np.random.default_rng([seed, 0x7A])
    adam = neuralcore.AdamConfig(lr=lr)
    batch = trained.config.batch_size
    losses = []
    for epoch in range(epochs):
        order = rng.permutation(len(corpus))
        total = 0.0
        for start in range(0, len(order), batch):
            rows = order[start:start + batch]
            trained.params.zero_grad()
            loss = rm_loss(trained, features[rows], targets[rows])
            value = loss.item()
            if not np.isfinite(value):
                raise errors.TrainingError(
                    f'non-finite reward loss at epoch {epoch}')
            loss.backward()
            neuralcore.adam(trained.params, adam)
            total += value * len(rows)
        losses.append(total / len(corpus))
        logger.debug('reward epoch %d loss %.4f', epoch, losses[-1])
    return trained, losses


def derive_pref_target(
    item: synthworld.VqaTriplet,
    reference: t.Sequence[str],
) -> float:
    """Target score of a policy answer against the oracle answer.

    10 for a matching value behind a rationale, 6 for a matching value
    without one, 0 for a well formed wrong value and -6 when the answer
    span is missing or its value lies outside the task domain.
    """
    value = answer_.extract_answer(item.answer)
    if value == answer_.INVALID:
        return SCORE_LOW
    if value not in oracle.VALUE_DOMAINS[item.task]:
        return SCORE_LOW
    if value != answer_.extract_answer(reference):
        return 0.0
    return 10.0 if answer_.has_think_span(item.answer) else 6.0


def continual_update(
    net: RewardNet,
    prefs: t.Sequence[PreferenceRecord],
    replay: t.Sequence[ScoredExample],
    epochs: int,
    seed: int,
    lr: float | None = None,
) -> RewardNet:
    """Retrain on new preference records mixed 1:1 with replayed graded
    examples.

    Raises:
        errors.ContractError: when the replay set is empty.
    """
    if not prefs:
        return net
    if not replay:
        raise errors.ContractError('continual update needs a replay set')
    rng = np.random.default_rng([seed, 0xC0])
    picks = rng.choice(
        len(replay), size=len(prefs), replace=len(replay) < len(prefs))
    union: list[ScoredExample] = [*prefs, *(replay[int(i)] for i in picks)]
    trained, losses = train_rm(
        net, union, epochs, lr or net.config.lr, seed)
    logger.info('reward model updated on %d prefs, final loss %.4f',
                len(prefs), losses[-1])
    return trained
