# ruff: noqa: F401
from .grpo import CompositeReward
from .grpo import GroupRollout
from .grpo import GrpoConfig
from .grpo import GrpoStep
from .grpo import RewardFn
from .grpo import collect_rollout
from .grpo import composite_reward
from .grpo import greedy_accuracy
from .grpo import group_advantages
from .grpo import grpo_loss
from .grpo import run_grpo
from .sft import SftConfig
from .sft import run_sft
from .sft import sft_loss
