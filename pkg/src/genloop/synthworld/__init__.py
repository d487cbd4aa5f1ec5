# ruff: noqa: F401
from .answer import INVALID
from .answer import extract_answer
from .answer import has_ans_span
from .answer import has_think_span
from .answer import normalize
from .answer import strip_rationale
from .image import DEFAULT_MIXTURE
from .image import Finding
from .image import SynthImage
from .image import image_for
from .image import sample_image
from .image import validate_mixture
from .oracle import RULE_TABLE
from .oracle import VALUE_DOMAINS
from .oracle import compose_answer
from .oracle import oracle_answer
from .oracle import oracle_trace
from .question import TEMPLATES
from .question import Question
from .question import render_question
from .records import TripletRecord
from .records import read_records
from .records import read_triplets
from .records import write_records
from .records import write_triplets
from .splits import Split
from .splits import SplitConfig
from .splits import make_split
from .triplet import VqaTriplet
from .triplet import oracle_triplet
from .vocab import VOCAB
from .vocab import Vocab
