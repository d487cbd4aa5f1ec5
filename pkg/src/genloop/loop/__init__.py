# ruff: noqa: F401
from .commands import PIPELINE
from .commands import IterationCommitted
from .commands import StageCommand
from .commands import StageCompleted
from .runner import create_loop_bus
from .runner import loop_iteration
from .runner import run_loop
from .state import LoopContext
from .state import LoopState
from .state import MetricsRow
from .state import dedup
from .state import filter_high
from .state import initial_state
from .state import merge_corpus
from .state import stage_seed
from .store import RunStore
