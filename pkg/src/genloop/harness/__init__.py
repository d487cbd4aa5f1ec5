# ruff: noqa: F401
from .metrics import EvalReport
from .metrics import Predictions
from .metrics import Scores
from .metrics import TransitionCounts
from .metrics import TransitionReport
from .metrics import error_transitions
from .metrics import evaluate
from .metrics import predict
from .metrics import presence_score
from .metrics import report_rows
from .metrics import transitions
from .output import aggregate
from .output import read_csv
from .output import write_csv
from .output import write_dat
