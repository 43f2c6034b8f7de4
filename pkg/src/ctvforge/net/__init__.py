from . import autograd
from .autograd import Tensor, conv3d, dice_loss, maxpool2, relu, sigmoid, upsample_trilinear
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .model import (
    PhnnDescriptor,
    forward_stack,
    init_params,
    params_as_tensors,
    phnn_forward,
)
from .optim import AdamState, adam_step
