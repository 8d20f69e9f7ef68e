"""Lightweight parameter containers: Module, Parameter and the conv/norm layers.

Parameters are named by their registration path ("integration.enc2.conv.weight"),
which keys the checkpoint format. Initialization is fan-in scaled uniform for
convolution weights, ones/zeros for normalization affine terms; every layer
takes an explicit numpy Generator so model construction is deterministic.
"""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from . import functional as F
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


class ActivationSetting:
    """Mutable activation selector shared by every block of one model.

    Switching kind changes no parameter names or shapes, which is what lets a
    checkpoint trained under one activation continue under another.
    """

    def __init__(self, kind: str = "relu"):
        self.kind = kind

    def __call__(self, x: Tensor) -> Tensor:
        return F.activate(x, self.kind)


class Module:
    """Base class: tracks sub-modules, parameters and buffers by attribute name."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    # -- traversal -----------------------------------------------------

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def modules(self) -> Iterator["Module"]:
        yield self
        for m in self._modules.values():
            yield from m.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    # -- state ---------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({name: b for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Strict load: names must match exactly, shapes must agree."""
        own_params = dict(self.named_parameters())
        own_buffers = dict(self.named_buffers())
        own = set(own_params) | set(own_buffers)
        missing = own - set(state)
        unexpected = set(state) - own
        if missing or unexpected:
            raise ValueError(
                f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, value in state.items():
            if name in own_params:
                target = own_params[name]
                if tuple(value.shape) != tuple(target.shape):
                    raise ValueError(
                        f"shape mismatch for {name}: {value.shape} vs {target.shape}")
                target.data = np.ascontiguousarray(value, dtype=target.dtype)
            else:
                buf = own_buffers[name]
                if tuple(value.shape) != tuple(buf.shape):
                    raise ValueError(
                        f"shape mismatch for buffer {name}: {value.shape} vs {buf.shape}")
                buf[...] = value

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._list = []
        for m in mods:
            self.append(m)

    def append(self, m: Module) -> None:
        self._modules[str(len(self._list))] = m
        self._list.append(m)

    def __iter__(self):
        return iter(self._list)

    def __len__(self):
        return len(self._list)

    def __getitem__(self, i):
        return self._list[i]


def _uniform_fanin(rng: np.random.Generator, shape: tuple, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class _ConvNd(Module):
    def __init__(self, nsp, in_ch, out_ch, kernel, stride=1, padding=0, dilation=1,
                 bias=True, rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        kernel = kernel if isinstance(kernel, tuple) else (kernel,) * nsp
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        fan_in = in_ch * int(np.prod(kernel))
        self.weight = Parameter(
            _uniform_fanin(rng, (out_ch, in_ch) + kernel, fan_in, dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv(x, self.weight, self.bias, self.stride, self.padding, self.dilation)


class Conv2d(_ConvNd):
    def __init__(self, in_ch, out_ch, kernel, **kw):
        super().__init__(2, in_ch, out_ch, kernel, **kw)


class Conv3d(_ConvNd):
    def __init__(self, in_ch, out_ch, kernel, **kw):
        super().__init__(3, in_ch, out_ch, kernel, **kw)


class _ConvTransposeNd(Module):
    def __init__(self, nsp, in_ch, out_ch, kernel, stride=1, padding=0,
                 bias=True, rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        kernel = kernel if isinstance(kernel, tuple) else (kernel,) * nsp
        self.nsp = nsp
        self.stride = stride if isinstance(stride, tuple) else (stride,) * nsp
        self.padding = padding if isinstance(padding, tuple) else (padding,) * nsp
        self.kernel = kernel
        fan_in = out_ch * int(np.prod(kernel))
        self.weight = Parameter(
            _uniform_fanin(rng, (in_ch, out_ch) + kernel, fan_in, dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None

    def forward(self, x: Tensor, output_size=None) -> Tensor:
        """output_size picks the output_padding needed to land on odd extents."""
        if output_size is None:
            outpad = (self.stride[0] - 1,) * self.nsp
        else:
            outpad = []
            for i, want in enumerate(output_size):
                base = ((x.shape[2 + i] - 1) * self.stride[i]
                        - 2 * self.padding[i] + self.kernel[i])
                op = want - base
                if not 0 <= op < max(self.stride[i], 1):
                    raise ValueError(
                        f"cannot reach extent {want} from {x.shape[2 + i]} on axis {i}")
                outpad.append(op)
            outpad = tuple(outpad)
        return F.conv_transpose(x, self.weight, self.bias, self.stride,
                                self.padding, outpad)


class ConvTranspose2d(_ConvTransposeNd):
    def __init__(self, in_ch, out_ch, kernel, **kw):
        super().__init__(2, in_ch, out_ch, kernel, **kw)


class ConvTranspose3d(_ConvTransposeNd):
    def __init__(self, in_ch, out_ch, kernel, **kw):
        super().__init__(3, in_ch, out_ch, kernel, **kw)


class BatchNorm(Module):
    """Batch normalization over (batch, spatial) for any spatial rank."""

    def __init__(self, num_features, momentum=0.1, epsilon=1e-5, dtype=np.float32):
        super().__init__()
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = Parameter(np.ones(num_features, dtype=dtype))
        self.beta = Parameter(np.zeros(num_features, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(num_features, dtype=dtype))
        self.register_buffer("running_var", np.ones(num_features, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.running_mean, self.running_var,
                            self.gamma, self.beta, self.training,
                            self.momentum, self.epsilon)
