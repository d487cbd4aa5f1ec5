# ruff: noqa: F401
from .checkpoint import dumps
from .checkpoint import load_checkpoint
from .checkpoint import loads
from .checkpoint import save_checkpoint
from .gradcheck import finite_diff_check
from .layers import LayerSpec
from .layers import init_mlp
from .layers import linear
from .layers import mlp_forward
from .optim import AdamConfig
from .optim import adam
from .optim import adam_step
from .params import ParamSet
from .tensor import Tensor
