"""
U-Net generator and patch discriminator definitions
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from contrastforge.constants import (
    CHANNEL_CAP, CONV, DECONV, INIT_STD, KERNEL_SIZE, LEAKY_RELU, LEAKY_SLOPE, RELU, TANH)
from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.tensor import (
    DTYPE, Tensor, concat, conv2d, conv_transpose2d, instance_norm, leaky_relu, relu, tanh)

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

GENERATOR_KIND = 'generator'
DISCRIMINATOR_KIND = 'discriminator'


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    stride: int
    padding: int
    norm: bool
    activation: str = None
    skip: str = None
    kernel_size: int = KERNEL_SIZE

    @property
    def weight_shape(self):
        if self.kind == DECONV:
            return self.in_channels, self.out_channels, self.kernel_size, self.kernel_size
        return self.out_channels, self.in_channels, self.kernel_size, self.kernel_size

    @property
    def parameter_count(self):
        return int(np.prod(self.weight_shape)) + self.out_channels


@dataclass(frozen=True)
class NetworkDef:
    kind: str
    layers: tuple
    in_channels: int
    out_channels: int
    depth: int = None

    @property
    def parameter_count(self):
        return sum(layer.parameter_count for layer in self.layers)


class ParamSet(OrderedDict):
    """
    Learnable tensors of one network, keyed ``<layer>.weight`` / ``<layer>.bias``
    """

    def count(self):
        return sum(p.size for p in self.values())

    def zero_grad(self):
        for p in self.values():
            p.zero_grad()

    def grads(self):
        return {name: p.grad for name, p in self.items()}

    def frozen(self):
        """
        Same values, no gradient slots; used when another network is being optimized
        """
        return ParamSet((name, p.detach()) for name, p in self.items())


def _channels(level, base_channels):
    return min(base_channels * 2 ** level, CHANNEL_CAP * base_channels)


def build_unet_generator(image_size, k_in, k_out, base_channels=16, depth=4):
    """
    Encoder of stride-2 convolutions, mirrored decoder of stride-2 transposed
    convolutions, each decoder level below the innermost concatenating its
    paired encoder output.
    """
    if depth < 2:
        raise ConfigurationError("U-Net depth must be at least 2, got {0}".format(depth))
    if k_in < 1 or k_out < 1 or base_channels < 1:
        raise ConfigurationError("channel counts must be positive")
    if image_size % 2 ** depth:
        raise ConfigurationError("image size {0} is not divisible by 2^{1}".format(image_size, depth))

    layers = []
    in_channels = k_in
    for level in range(depth):
        out_channels = _channels(level, base_channels)
        layers.append(LayerSpec(
            name='e{0}'.format(level), kind=CONV, in_channels=in_channels, out_channels=out_channels,
            stride=2, padding=1, norm=level > 0, activation=LEAKY_RELU))
        in_channels = out_channels

    for level in reversed(range(depth)):
        innermost = level == depth - 1
        skip = None if innermost else 'e{0}'.format(level)
        in_channels = _channels(level, base_channels) * (1 if innermost else 2)
        if level == 0:
            layers.append(LayerSpec(
                name='d0', kind=DECONV, in_channels=in_channels, out_channels=k_out,
                stride=2, padding=1, norm=False, activation=TANH, skip=skip))
        else:
            layers.append(LayerSpec(
                name='d{0}'.format(level), kind=DECONV, in_channels=in_channels,
                out_channels=_channels(level - 1, base_channels),
                stride=2, padding=1, norm=True, activation=RELU, skip=skip))

    return NetworkDef(kind=GENERATOR_KIND, layers=tuple(layers), in_channels=k_in, out_channels=k_out, depth=depth)


def build_patch_discriminator(k_cond, k_img, base_channels=16, n_layers=3):
    """
    Stride-2 convolutions followed by two stride-1 convolutions, the last one
    emitting a one-channel map of raw patch scores.
    """
    if n_layers < 1:
        raise ConfigurationError("discriminator needs at least one layer, got {0}".format(n_layers))
    if k_cond < 0 or k_img < 1 or base_channels < 1:
        raise ConfigurationError("channel counts must be positive")

    in_channels = k_cond + k_img
    layers = [LayerSpec(name='c0', kind=CONV, in_channels=in_channels, out_channels=base_channels,
                        stride=2, padding=1, norm=False, activation=LEAKY_RELU)]
    previous = base_channels
    for n in range(1, n_layers):
        out_channels = min(2 ** n, CHANNEL_CAP) * base_channels
        layers.append(LayerSpec(name='c{0}'.format(n), kind=CONV, in_channels=previous, out_channels=out_channels,
                                stride=2, padding=1, norm=True, activation=LEAKY_RELU))
        previous = out_channels
    out_channels = min(2 ** n_layers, CHANNEL_CAP) * base_channels
    layers.append(LayerSpec(name='c{0}'.format(n_layers), kind=CONV, in_channels=previous,
                            out_channels=out_channels, stride=1, padding=1, norm=True, activation=LEAKY_RELU))
    layers.append(LayerSpec(name='score', kind=CONV, in_channels=out_channels, out_channels=1,
                            stride=1, padding=1, norm=False))

    return NetworkDef(kind=DISCRIMINATOR_KIND, layers=tuple(layers), in_channels=in_channels, out_channels=1)


def create_params(net):
    """
    Zero-valued parameters for every layer of ``net``
    """
    params = ParamSet()
    for layer in net.layers:
        params[layer.name + '.weight'] = Tensor(np.zeros(layer.weight_shape, dtype=DTYPE), requires_grad=True)
        params[layer.name + '.bias'] = Tensor(np.zeros(layer.out_channels, dtype=DTYPE), requires_grad=True)
    return params


def init_weights(params, seed):
    """
    Kernels drawn from N(0, 0.02^2) in parameter order from one seeded generator; biases zero
    """
    rng = np.random.default_rng(seed)
    initialized = ParamSet()
    for name, param in params.items():
        if name.endswith('.weight'):
            values = rng.normal(0.0, INIT_STD, size=param.shape)
        else:
            values = np.zeros(param.shape, dtype=DTYPE)
        initialized[name] = Tensor(values, requires_grad=True)
    return initialized


def build_params(net, seed):
    return init_weights(create_params(net), seed)


def _apply_layer(layer, params, h):
    weight = params[layer.name + '.weight']
    bias = params[layer.name + '.bias']
    if layer.kind == DECONV:
        h = conv_transpose2d(h, weight, stride=layer.stride, padding=layer.padding, bias=bias)
    else:
        h = conv2d(h, weight, bias=bias, stride=layer.stride, padding=layer.padding)
    if layer.norm:
        h = instance_norm(h)
    if layer.activation == LEAKY_RELU:
        h = leaky_relu(h, LEAKY_SLOPE)
    elif layer.activation == RELU:
        h = relu(h)
    elif layer.activation == TANH:
        h = tanh(h)
    return h


def _check_input(net, x):
    if x.ndim != 4 or x.shape[1] != net.in_channels:
        raise UsageError("{0} expects (N, {1}, H, W) input, got {2}".format(net.kind, net.in_channels, x.shape))


def generator_forward(net, params, x):
    """
    Runs the U-Net on an (N, k_in, H, W) batch; values come out in (-1, 1)
    """
    _check_input(net, x)
    step = 2 ** net.depth
    if x.shape[2] % step or x.shape[3] % step:
        raise UsageError("generator input {0}x{1} is not divisible by {2}".format(x.shape[2], x.shape[3], step))
    skips = {}
    h = x
    for layer in net.layers:
        if layer.skip is not None:
            h = concat([h, skips[layer.skip]], axis=1)
        h = _apply_layer(layer, params, h)
        skips[layer.name] = h
    return h


def discriminator_forward(net, params, x):
    """
    Returns the raw (N, 1, h, w) patch score map
    """
    _check_input(net, x)
    h = x
    for layer in net.layers:
        h = _apply_layer(layer, params, h)
    return h


def to_network_range(values):
    """
    Maps intensities from [0, 1] to [-1, 1]
    """
    return 2.0 * np.asarray(values, dtype=DTYPE) - 1.0


def from_network_range(values):
    return (np.asarray(values, dtype=DTYPE) + 1.0) / 2.0
