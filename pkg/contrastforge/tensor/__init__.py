"""
Dense tensors with reverse-mode differentiation
"""
from contrastforge.tensor.base import DTYPE, Record, Tape, Tensor, backward, current_tape, zero_grad
from contrastforge.tensor.gradcheck import grad_check
from contrastforge.tensor.ops import (
    abs, add, as_tensor, bce_with_logits, concat, conv2d, conv_transpose2d, instance_norm, leaky_relu, mean, mul,
    pad_zero, reduce_sum, relu, square, sub, tanh)

__all__ = [
    'DTYPE', 'Record', 'Tape', 'Tensor', 'backward', 'current_tape', 'zero_grad', 'grad_check',
    'abs', 'add', 'as_tensor', 'bce_with_logits', 'concat', 'conv2d', 'conv_transpose2d', 'instance_norm',
    'leaky_relu', 'mean', 'mul', 'pad_zero', 'reduce_sum', 'relu', 'square', 'sub', 'tanh',
]
