# ruff: noqa: F401
from .config import HarnessConfig
from .config import LoopConfig
from .config import build_config
from .config import load_config
from .dispatcher import CommandDispatcher
from .dispatcher import EventDispatcher
from .errors import ConfigError
from .errors import ContractError
from .errors import DataError
from .errors import GenloopError
from .errors import HandlerNotFoundError
from .errors import IntegrityError
from .errors import TrainingError
from .generator import GenState
from .generator import Generator
from .generator import GeneratorConfig
from .gradecorpus import GradeConfig
from .gradecorpus import GradedExample
from .gradecorpus import build_graded_dataset
from .handler import CommandHandler
from .handler import EventHandler
from .handler import EventStream
from .handler import Handler
from .handler import Logger
from .handler import LoggerMiddleware
from .iterator import EventIterator
from .iterator import InMemoryEventIterator
from .iterator import JournalEventIterator
from .message import Command
from .message import Event
from .message import Message
from .messagebus import MessageBus
from .messagebus import create_message_bus
from .policy import PolicyConfig
from .policy import PolicyNet
from .rewardmodel import PreferenceRecord
from .rewardmodel import RewardConfig
from .rewardmodel import RewardNet
from .synthworld import VqaTriplet
