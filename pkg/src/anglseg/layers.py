"""Trainable layer wrappers over the tensor ops.

Each layer owns named parameter Tensors and exposes them through params()
(trainable) and buffers() (batch-norm running statistics), so a model can
be flattened into a checkpoint dict and restored exactly.
"""

import numpy as np

from . import nnops, tensor
from .tensor import Tensor


def he_normal(rng, shape, fan_in):
    std = np.sqrt(2.0 / fan_in)
    return (rng.normal(0.0, std, size=shape)).astype(np.float32)


class Conv2d:
    def __init__(self, name, in_channels, out_channels, kernel, rng,
                 stride=1, dilation=1, padding=None, zero_init=False):
        if padding is None:
            padding = dilation * (kernel - 1) // 2
        self.spec = nnops.ConvSpec(in_channels, out_channels,
                                   (kernel, kernel), stride=stride,
                                   dilation=dilation, padding=padding)
        self.name = name
        shape = (out_channels, in_channels, kernel, kernel)
        if zero_init:
            weights = np.zeros(shape, dtype=np.float32)
        else:
            weights = he_normal(rng, shape, in_channels * kernel * kernel)
        self.weight = Tensor(weights, requires_grad=True,
                             name=f"{name}.weight")
        self.bias = Tensor(np.zeros(out_channels, dtype=np.float32),
                           requires_grad=True, name=f"{name}.bias")

    def forward(self, x):
        return nnops.conv2d(x, self.weight, self.bias, self.spec)

    def params(self):
        return {self.weight.name: self.weight, self.bias.name: self.bias}

    def buffers(self):
        return {}


class BatchNorm2d:
    def __init__(self, name, channels):
        self.name = name
        self.state = nnops.BatchNormState(channels)
        self.gamma = Tensor(np.ones(channels, dtype=np.float32),
                            requires_grad=True, name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(channels, dtype=np.float32),
                           requires_grad=True, name=f"{name}.beta")
        self.training = True

    def forward(self, x):
        return nnops.batch_norm(x, self.gamma, self.beta, self.state,
                                training=self.training)

    def params(self):
        return {self.gamma.name: self.gamma, self.beta.name: self.beta}

    def buffers(self):
        return {f"{self.name}.running_mean": self.state.running_mean,
                f"{self.name}.running_var": self.state.running_var}

    def load_buffer(self, key, value):
        if key.endswith("running_mean"):
            self.state.running_mean = value.astype(np.float32).copy()
        else:
            self.state.running_var = value.astype(np.float32).copy()


class ConvBnRelu:
    """conv -> batch norm -> relu, the standard stride/dilation unit."""

    def __init__(self, name, in_channels, out_channels, kernel, rng,
                 stride=1, dilation=1):
        self.conv = Conv2d(f"{name}.conv", in_channels, out_channels, kernel,
                           rng, stride=stride, dilation=dilation)
        self.bn = BatchNorm2d(f"{name}.bn", out_channels)

    def forward(self, x):
        return tensor.relu(self.bn.forward(self.conv.forward(x)))

    def params(self):
        return {**self.conv.params(), **self.bn.params()}

    def buffers(self):
        return self.bn.buffers()

    def set_training(self, flag):
        self.bn.training = flag


class ResidualBlock:
    """Two 3x3 conv-BN-relu units plus a shortcut, summed without a
    trailing relu so that zeroing the convs leaves exactly the shortcut."""

    def __init__(self, name, in_channels, out_channels, rng, stride=1,
                 dilation=1):
        self.unit1 = ConvBnRelu(f"{name}.unit1", in_channels, out_channels,
                                3, rng, stride=stride, dilation=dilation)
        self.unit2 = ConvBnRelu(f"{name}.unit2", out_channels, out_channels,
                                3, rng, dilation=dilation)
        if in_channels != out_channels or stride != 1:
            self.short_conv = Conv2d(f"{name}.short.conv", in_channels,
                                     out_channels, 1, rng, stride=stride,
                                     padding=0)
            self.short_bn = BatchNorm2d(f"{name}.short.bn", out_channels)
        else:
            self.short_conv = None
            self.short_bn = None

    def forward(self, x):
        main = self.unit2.forward(self.unit1.forward(x))
        if self.short_conv is not None:
            shortcut = self.short_bn.forward(self.short_conv.forward(x))
        else:
            shortcut = x
        return tensor.add(shortcut, main)

    def params(self):
        out = {**self.unit1.params(), **self.unit2.params()}
        if self.short_conv is not None:
            out.update(self.short_conv.params())
            out.update(self.short_bn.params())
        return out

    def buffers(self):
        out = {**self.unit1.buffers(), **self.unit2.buffers()}
        if self.short_bn is not None:
            out.update(self.short_bn.buffers())
        return out

    def set_training(self, flag):
        self.unit1.set_training(flag)
        self.unit2.set_training(flag)
        if self.short_bn is not None:
            self.short_bn.training = flag
