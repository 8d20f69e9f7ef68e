"""Minimal dense-tensor engine with reverse-mode differentiation."""

from . import functional
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, check_gradients
from .module import (ActivationSetting, BatchNorm, Conv2d, Conv3d,
                     ConvTranspose2d, ConvTranspose3d, Module, ModuleList,
                     Parameter)
from .tensor import (Tensor, concat, is_grad_enabled, make_node, no_grad,
                     set_nan_checks, tensor)

__all__ = [
    "Tensor", "tensor", "concat", "no_grad", "is_grad_enabled", "make_node",
    "set_nan_checks", "functional",
    "Module", "ModuleList", "Parameter", "ActivationSetting",
    "Conv2d", "Conv3d", "ConvTranspose2d", "ConvTranspose3d", "BatchNorm",
    "check_gradients", "GradCheckReport",
    "save_checkpoint", "load_checkpoint",
]
