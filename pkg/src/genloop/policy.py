"""The reasoning policy: a small causal attention model that reads
an image, a question and an answer prefix and predicts the next answer
token.

Context layout, left to right: the modality token, one slot per possible
finding, the question left padded to `question_len`, SEP, then the answer
tokens. The logits read at SEP predict the first answer token.
"""
import logging
import math
import pathlib
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import neuralcore
from genloop import synthworld
from genloop.neuralcore import tensor
from genloop.synthworld import image as image_
from genloop.synthworld import vocab

logger = logging.getLogger(__name__)

IMAGE_SLOTS = 1 + image_.MAX_FINDINGS
"""The modality token followed by the finding slots."""
SLOT_FEATURES = (
    1 + len(vocab.SHAPES) + len(vocab.INTENSITIES) + len(vocab.SIZES)
    + 2 * image_.GRID + len(vocab.MODALITIES))
"""present flag, shape, intensity, size, row, col and modality one-hots."""
_MASKED = -1e9
_SLOT_OFFSETS = np.cumsum([
    0, 1, len(vocab.SHAPES), len(vocab.INTENSITIES), len(vocab.SIZES),
    image_.GRID, image_.GRID])


class PolicyConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    embed_dim: int = pydantic.Field(default=32, gt=0)
    width: int = pydantic.Field(default=64, gt=0)
    heads: int = pydantic.Field(default=2, gt=0)
    layers: int = pydantic.Field(default=2, gt=0)
    ffn: int = pydantic.Field(default=128, gt=0)
    question_len: int = pydantic.Field(default=8, gt=0)
    max_answer_len: int = pydantic.Field(default=24, gt=0)
    output_tokens: tuple[str, ...] | None = None
    """Tokens the head predicts. None means the whole vocabulary; tiny
    output vocabularies make brute force checks feasible."""

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'PolicyConfig':
        if self.width % self.heads:
            raise ValueError('width must be divisible by heads')
        if self.output_tokens is not None:
            if len(set(self.output_tokens)) != len(self.output_tokens):
                raise ValueError('output tokens must be unique')
            if vocab.EOS not in self.output_tokens:
                raise ValueError('output tokens must include EOS')
            for token in self.output_tokens:
                if token not in vocab.VOCAB:
                    raise ValueError(f'unknown output token {token!r}')
        return self

    @property
    def prompt_len(self) -> int:
        return IMAGE_SLOTS + self.question_len + 1

    @property
    def context_len(self) -> int:
        return self.prompt_len + self.max_answer_len


class Completion(pydantic.BaseModel):
    """A sampled answer with the log-probability of every token under the
    net that produced it (at temperature 1)."""
    model_config = pydantic.ConfigDict(frozen=True)

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    terminated: bool
    """True when EOS was emitted, False when the length cap hit."""

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'Completion':
        if len(self.tokens) != len(self.logprobs):
            raise ValueError('one log-probability per token is required')
        if any(lp > 0.0 for lp in self.logprobs):
            raise ValueError('log-probabilities must be <= 0')
        return self

    @property
    def logprob(self) -> float:
        return math.fsum(self.logprobs)


class PolicyNet:
    """Parameters, architecture and output vocabulary of the policy."""

    def __init__(
        self,
        params: neuralcore.ParamSet,
        config: PolicyConfig | None = None,
    ) -> None:
        self.params = params
        self.config = config or PolicyConfig()
        self.out_vocab = (
            vocab.VOCAB if self.config.output_tokens is None
            else vocab.Vocab(self.config.output_tokens))

    def __repr__(self) -> str:
        return f'<PolicyNet params={self.params.size()}>'

    @classmethod
    def create(
        cls,
        config: PolicyConfig,
        seed: int,
        zero_head: bool = True,
    ) -> 'PolicyNet':
        """Initialize a net. With `zero_head` every position starts out
        uniform over the output vocabulary."""
        rng = np.random.default_rng([seed, 0x9F])
        c = config
        n_out = len(c.output_tokens or vocab.VOCAB.tokens)

        def normal(*shape: int, std: float) -> np.ndarray:
            return rng.normal(0.0, std, size=shape).astype(np.float32)

        arrays = {
            'tok_emb': normal(len(vocab.VOCAB), c.embed_dim, std=1.0),
            'tok_proj': normal(
                c.embed_dim, c.width, std=1.0 / math.sqrt(c.embed_dim)),
            'img_proj': normal(SLOT_FEATURES, c.width, std=0.5),
            'pos_emb': normal(c.context_len, c.width, std=0.5),
        }
        for layer in range(c.layers):
            for name in ('wq', 'wk', 'wv'):
                arrays[f'block{layer}.{name}'] = normal(
                    c.width, c.width, std=1.0 / math.sqrt(c.width))
            arrays[f'block{layer}.wo'] = normal(
                c.width, c.width, std=0.5 / math.sqrt(c.width))
            arrays[f'block{layer}.bo'] = np.zeros(c.width, np.float32)
            arrays[f'block{layer}.w1'] = normal(
                c.width, c.ffn, std=1.0 / math.sqrt(c.width))
            arrays[f'block{layer}.b1'] = np.zeros(c.ffn, np.float32)
            arrays[f'block{layer}.w2'] = normal(
                c.ffn, c.width, std=0.5 / math.sqrt(c.ffn))
            arrays[f'block{layer}.b2'] = np.zeros(c.width, np.float32)
        arrays['head_w'] = (
            np.zeros((c.width, n_out), np.float32) if zero_head
            else normal(c.width, n_out, std=1.0 / math.sqrt(c.width)))
        arrays['head_b'] = np.zeros(n_out, np.float32)
        params = neuralcore.ParamSet(
            arrays, {'kind': 'policy', 'config': c.model_dump(mode='json')})
        return cls(params, config)

    def copy(self) -> 'PolicyNet':
        return PolicyNet(self.params.copy(), self.config)

    def with_params(self, params: neuralcore.ParamSet) -> 'PolicyNet':
        return PolicyNet(params, self.config)

    def checksum(self) -> str:
        return self.params.checksum()

    def save(self, path: str | pathlib.Path) -> str:
        return neuralcore.save_checkpoint(path, self.params)

    @classmethod
    def load(cls, path: str | pathlib.Path) -> 'PolicyNet':
        params = neuralcore.load_checkpoint(path)
        if params.descriptor.get('kind') != 'policy':
            raise errors.DataError(f'{path} is not a policy checkpoint')
        return cls(params, PolicyConfig.model_validate(
            params.descriptor['config']))


Prompt: t.TypeAlias = tuple[synthworld.SynthImage, t.Sequence[str]]
"""An image and its question tokens."""


def slot_features(img: synthworld.SynthImage) -> np.ndarray:
    """One feature row per finding slot; empty slots are all zero."""
    feats = np.zeros((image_.MAX_FINDINGS, SLOT_FEATURES), np.float32)
    modality = vocab.MODALITIES.index(img.modality)
    for k, finding in enumerate(img.findings):
        hot = (
            0,
            vocab.SHAPES.index(finding.shape),
            vocab.INTENSITIES.index(finding.intensity),
            vocab.SIZES.index(finding.size),
            finding.row,
            finding.col,
            modality,
        )
        feats[k, _SLOT_OFFSETS + np.asarray(hot)] = 1.0
    return feats


class _Batch(t.NamedTuple):
    ids: np.ndarray
    feats: np.ndarray
    valid: np.ndarray


def _encode(
    net: PolicyNet,
    prompts: t.Sequence[Prompt],
    answers: t.Sequence[t.Sequence[str]],
) -> _Batch:
    c = net.config
    length = max((len(a) for a in answers), default=0)
    seq = c.prompt_len + length
    if seq > c.context_len:
        raise errors.DataError(
            f'context of {seq} positions exceeds {c.context_len}')
    pad = vocab.VOCAB.id(vocab.PAD)
    ids = np.full((len(prompts), seq), pad, dtype=np.int64)
    feats = np.zeros((len(prompts), seq, SLOT_FEATURES), np.float32)
    valid = np.zeros((len(prompts), seq), dtype=bool)
    for row, ((img, question), answer) in enumerate(zip(prompts, answers)):
        question = list(question)
        if len(question) > c.question_len:
            raise errors.DataError(
                f'question of {len(question)} tokens exceeds '
                f'{c.question_len}')
        ids[row, 0] = vocab.VOCAB.id(img.modality)
        valid[row, 0] = True
        feats[row, 1:IMAGE_SLOTS] = slot_features(img)
        valid[row, 1:1 + len(img.findings)] = True
        start = IMAGE_SLOTS + c.question_len - len(question)
        ids[row, start:c.prompt_len - 1] = vocab.VOCAB.ids(question)
        valid[row, start:c.prompt_len] = True
        ids[row, c.prompt_len - 1] = vocab.VOCAB.id(vocab.SEP)
        ids[row, c.prompt_len:c.prompt_len + len(answer)] = (
            vocab.VOCAB.ids(answer))
        valid[row, c.prompt_len:c.prompt_len + len(answer)] = True
    return _Batch(ids, feats, valid)


def attention_bias(valid: np.ndarray) -> np.ndarray:
    """Additive mask of shape (batch, 1, seq, seq): position i may attend
    to position j iff j <= i and j holds a real token."""
    seq = valid.shape[1]
    causal = np.tril(np.ones((seq, seq), dtype=bool))
    allowed = causal[None, :, :] & valid[:, None, :]
    return np.where(allowed, 0.0, _MASKED).astype(np.float32)[:, None]


def _block(
    net: PolicyNet,
    x: tensor.Tensor,
    bias: tensor.Tensor,
    layer: int,
) -> tensor.Tensor:
    p = net.params
    c = net.config
    batch, seq, _ = x.shape
    head_dim = c.width // c.heads

    def split(proj: tensor.Tensor) -> tensor.Tensor:
        return proj.reshape(batch, seq, c.heads, head_dim).transpose(
            0, 2, 1, 3)

    q = split(x @ p[f'block{layer}.wq'])
    k = split(x @ p[f'block{layer}.wk'])
    v = split(x @ p[f'block{layer}.wv'])
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(head_dim))
    weights = tensor.softmax(scores + bias, axis=-1)
    mixed = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, seq, c.width)
    x = x + (mixed @ p[f'block{layer}.wo'] + p[f'block{layer}.bo'])
    hidden = tensor.tanh(x @ p[f'block{layer}.w1'] + p[f'block{layer}.b1'])
    return x + (hidden @ p[f'block{layer}.w2'] + p[f'block{layer}.b2'])


def _forward(net: PolicyNet, batch: _Batch) -> tensor.Tensor:
    """Logits at the answer positions, shape (batch, answer_len + 1, V)."""
    p = net.params
    seq = batch.ids.shape[1]
    tokens = tensor.embedding(p['tok_emb'], batch.ids) @ p['tok_proj']
    slots = tensor.Tensor(batch.feats) @ p['img_proj']
    x = tokens + slots + p['pos_emb'][:seq]
    bias = tensor.Tensor(attention_bias(batch.valid))
    for layer in range(net.config.layers):
        x = _block(net, x, bias, layer)
    start = net.config.prompt_len - 1
    return x[:, start:, :] @ p['head_w'] + p['head_b']


def forward_logits(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
    prefix: t.Sequence[str] = (),
) -> np.ndarray:
    """Next-token logits after every answer prefix length.

    Row t is the distribution of answer token t given `prefix[:t]`, so the
    result has `len(prefix) + 1` rows.

    Raises:
        errors.DataError: when the context exceeds the configured length or
            a token is out of vocabulary.
    """
    logits = _forward(net, _encode(net, [(img, question)], [prefix]))
    return logits.data[0].copy()


def token_logprobs(
    net: PolicyNet,
    prompts: t.Sequence[Prompt],
    answers: t.Sequence[t.Sequence[str]],
) -> tuple[tensor.Tensor, np.ndarray]:
    """Teacher forced log-probability of every answer token.

    Returns:
        A `(batch, longest answer)` tensor on the tape and a float mask of
        the same shape marking real answer tokens.
    """
    length = max((len(a) for a in answers), default=0)
    if length == 0:
        raise errors.ContractError('answers are empty')
    batch = _encode(net, prompts, answers)
    targets = np.zeros((len(answers), length), dtype=np.int64)
    mask = np.zeros((len(answers), length), dtype=np.float32)
    for row, answer in enumerate(answers):
        targets[row, :len(answer)] = net.out_vocab.ids(answer)
        mask[row, :len(answer)] = 1.0
    logits = _forward(net, batch)[:, :length, :]
    return tensor.gather_last(tensor.log_softmax(logits), targets), mask


def sequence_logprob(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
    answer: t.Sequence[str],
) -> float:
    """log pi(answer | image, question), a sum of per-token terms."""
    if not answer:
        return 0.0
    logp, mask = token_logprobs(net, [(img, question)], [answer])
    return float(np.sum(logp.data.astype(np.float64) * mask))


def _log_softmax(row: np.ndarray) -> np.ndarray:
    row = row.astype(np.float64)
    shifted = row - row.max()
    return shifted - np.log(np.exp(shifted).sum())


def sample_group(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
    temperature: float,
    seeds: t.Sequence[int],
) -> list[Completion]:
    """Sample one completion per seed for a single prompt.

    Temperature 0 decodes greedily. Recorded log-probabilities are those of
    the net itself, independent of the temperature.

    Raises:
        errors.ConfigError: on a negative temperature.
    """
    if temperature < 0.0:
        raise errors.ConfigError('temperature must be non-negative')
    eos = vocab.EOS
    rngs = [np.random.default_rng(seed) for seed in seeds]
    tokens: list[list[str]] = [[] for _ in seeds]
    logps: list[list[float]] = [[] for _ in seeds]
    done = [False] * len(seeds)
    for step in range(net.config.max_answer_len):
        active = [i for i, finished in enumerate(done) if not finished]
        if not active:
            break
        batch = _encode(
            net, [(img, question)] * len(active), [tokens[i] for i in active])
        logits = _forward(net, batch).data[:, step, :]
        for row, i in zip(logits, active):
            logp = _log_softmax(row)
            if temperature == 0.0:
                choice = int(np.argmax(row))
            else:
                probs = np.exp(_log_softmax(row / temperature))
                cumulative = np.cumsum(probs)
                choice = int(np.searchsorted(
                    cumulative, rngs[i].random() * cumulative[-1],
                    side='right'))
                choice = min(choice, len(probs) - 1)
            token = net.out_vocab.token(choice)
            tokens[i].append(token)
            logps[i].append(min(float(logp[choice]), 0.0))
            done[i] = token == eos
    return [
        Completion(
            tokens=tuple(tokens[i]),
            logprobs=tuple(logps[i]),
            terminated=bool(tokens[i]) and tokens[i][-1] == eos,
        )
        for i in range(len(seeds))
    ]


def sample_answer(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
    temperature: float,
    seed: int,
) -> Completion:
    """Ancestral sampling until EOS or the length cap."""
    return sample_group(net, img, question, temperature, [seed])[0]


def greedy_answer(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
) -> tuple[str, ...]:
    return sample_answer(net, img, question, 0.0, 0).tokens


def greedy_answers(
    net: PolicyNet,
    prompts: t.Sequence[Prompt],
    batch_size: int = 64,
) -> list[tuple[str, ...]]:
    """Greedy decoding of many prompts, `batch_size` at a time."""
    results: list[tuple[str, ...]] = []
    for start in range(0, len(prompts), batch_size):
        chunk = prompts[start:start + batch_size]
        tokens: list[list[str]] = [[] for _ in chunk]
        done = [False] * len(chunk)
        for step in range(net.config.max_answer_len):
            active = [i for i, finished in enumerate(done) if not finished]
            if not active:
                break
            batch = _encode(
                net, [chunk[i] for i in active], [tokens[i] for i in active])
            logits = _forward(net, batch).data[:, step, :]
            for row, i in zip(logits, active):
                token = net.out_vocab.token(int(np.argmax(row)))
                tokens[i].append(token)
                done[i] = token == vocab.EOS
        results.extend(tuple(answer) for answer in tokens)
    return results


def next_token_probs(
    net: PolicyNet,
    img: synthworld.SynthImage,
    question: t.Sequence[str],
    prefix: t.Sequence[str],
) -> dict[str, float]:
    """Output distribution after `prefix`, keyed by token."""
    row = forward_logits(net, img, question, prefix)[-1]
    probs = np.exp(_log_softmax(row))
    return dict(zip(net.out_vocab.tokens, (float(p) for p in probs)))


def completion_triplet(
    item: synthworld.VqaTriplet,
    completion: Completion,
) -> synthworld.VqaTriplet:
    """The prompt of `item` answered by the policy."""
    return item.with_answer(completion.tokens, 'policy')
