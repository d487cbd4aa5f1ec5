import itertools

import numpy as np
import pytest

from genloop import gradecorpus
from genloop import policy
from genloop import rewardmodel
from genloop import synthworld
from genloop import trainers
from genloop.synthworld import splits

pytestmark = pytest.mark.slow

TARGET = ('ANS', 'yes', '/ANS', 'EOS')
BANDIT = policy.PolicyConfig(
    embed_dim=8, width=16, heads=2, layers=1, ffn=16, max_answer_len=4,
    output_tokens=('ANS', 'yes', 'no', '/ANS', 'EOS'))


def _oracles(count, seed):
    rng = np.random.default_rng([seed, 0xACC])
    items = []
    for _ in range(count):
        img = synthworld.sample_image(int(rng.integers(2**62)))
        items.append(synthworld.oracle_triplet(
            img, splits.sample_prompt(rng, img)))
    return items


@pytest.mark.parametrize('seed', range(5))
def test_grade_ordering_on_holdout(seed):
    train = gradecorpus.build_graded_dataset(
        _oracles(1700, seed), gradecorpus.GradeConfig(), seed)
    holdout = gradecorpus.build_graded_dataset(
        _oracles(450, seed + 100),
        gradecorpus.GradeConfig(counts=(100, 100, 100, 100)), seed + 100)
    config = rewardmodel.RewardConfig()
    net, losses = rewardmodel.train_rm(
        rewardmodel.RewardNet.create(config, seed), train, config.epochs,
        config.lr, seed)
    means = [
        float(np.mean(rewardmodel.score_batch(
            net, [e.triplet for e in holdout if e.grade == grade])))
        for grade in (1, 2, 3, 4)
    ]
    assert losses[-1] < 4.0
    for better, worse in zip(means, means[1:]):
        assert better - worse >= 1.0
    assert means[0] - means[3] >= 8.0


def _prefix_reward(item, answers):
    """Length of the matching prefix of TARGET, as a fraction."""
    rewards = []
    for answer in answers:
        hits = 0
        for got, want in zip(answer, TARGET):
            if got != want:
                break
            hits += 1
        rewards.append(hits / len(TARGET))
    return rewards


def _brute_force_optimum(item):
    best, best_reward = None, -1.0
    tokens = BANDIT.output_tokens
    for length in range(1, BANDIT.max_answer_len + 1):
        for answer in itertools.product(tokens, repeat=length):
            reward = _prefix_reward(item, [answer])[0]
            if reward > best_reward:
                best, best_reward = answer, reward
    return best


@pytest.mark.parametrize('seed', range(5))
def test_grpo_reaches_the_bandit_optimum(seed):
    prompts = _oracles(4, seed)
    optimum = _brute_force_optimum(prompts[0])
    net = policy.PolicyNet.create(BANDIT, seed)
    config = trainers.GrpoConfig(
        group_size=8, steps=200, prompts_per_step=2, lr=2e-2, kl_coef=0.0,
        seed=seed)
    trained, _ = trainers.run_grpo(
        net, net.copy(), _prefix_reward, prompts, config)
    for item in prompts:
        assert policy.greedy_answer(
            trained, item.image, item.question.tokens) == optimum
