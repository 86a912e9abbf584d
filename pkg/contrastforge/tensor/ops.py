"""
Differentiable primitives

Every function takes and returns ``Tensor`` objects. When a tape is active and
an input requires a gradient, the result is recorded together with a closure
computing the input gradients from the output gradient.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.settings import get_settings_value
from contrastforge.tensor.base import DTYPE, Tensor, record


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise UsageError("Shapes {0} and {1} do not broadcast".format(a.shape, b.shape), e)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = Tensor._wrap(a.data + b.data)

    def backward_fn(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return record('add', (a, b), out, backward_fn)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = Tensor._wrap(a.data - b.data)

    def backward_fn(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return record('sub', (a, b), out, backward_fn)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = Tensor._wrap(a.data * b.data)

    def backward_fn(grad):
        return _unbroadcast(grad * b.data, a.shape), _unbroadcast(grad * a.data, b.shape)

    return record('mul', (a, b), out, backward_fn)


def mean(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.mean(x.data))

    def backward_fn(grad):
        return np.full(x.shape, grad / x.size, dtype=DTYPE),

    return record('mean', (x,), out, backward_fn)


def reduce_sum(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.sum(x.data))

    def backward_fn(grad):
        return np.full(x.shape, grad, dtype=DTYPE),

    return record('sum', (x,), out, backward_fn)


def abs(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.abs(x.data))

    def backward_fn(grad):
        # sign(0) == 0
        return grad * np.sign(x.data),

    return record('abs', (x,), out, backward_fn)


def square(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.square(x.data))

    def backward_fn(grad):
        return grad * 2.0 * x.data,

    return record('square', (x,), out, backward_fn)


def relu(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.maximum(x.data, 0.0))

    def backward_fn(grad):
        return grad * (x.data > 0.0),

    return record('relu', (x,), out, backward_fn)


def leaky_relu(x, slope):
    if not 0.0 <= slope < 1.0:
        raise ConfigurationError("leaky_relu slope must be in [0, 1), got {0}".format(slope))
    x = as_tensor(x)
    out = Tensor._wrap(np.where(x.data > 0.0, x.data, slope * x.data))

    def backward_fn(grad):
        return grad * np.where(x.data > 0.0, 1.0, slope),

    return record('leaky_relu', (x,), out, backward_fn)


def tanh(x):
    x = as_tensor(x)
    out = Tensor._wrap(np.tanh(x.data))

    def backward_fn(grad):
        return grad * (1.0 - np.square(out.data)),

    return record('tanh', (x,), out, backward_fn)


def _normalize_axis(axis, ndim):
    if not -ndim <= axis < ndim:
        raise ConfigurationError("axis {0} is out of range for {1} dimensions".format(axis, ndim))
    return axis % ndim


def concat(xs, axis):
    xs = [as_tensor(x) for x in xs]
    if not xs:
        raise UsageError("concat needs at least one tensor")
    axis = _normalize_axis(axis, xs[0].ndim)
    try:
        out = Tensor._wrap(np.concatenate([x.data for x in xs], axis=axis))
    except ValueError as e:
        raise UsageError("Cannot concatenate shapes {0}".format([x.shape for x in xs]), e)
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def backward_fn(grad):
        return tuple(np.split(grad, bounds, axis=axis))

    return record('concat', tuple(xs), out, backward_fn)


def pad_zero(x, sizes):
    """
    Zero-pads ``x``; ``sizes`` holds one (before, after) pair per axis
    """
    x = as_tensor(x)
    sizes = [tuple(int(v) for v in pair) for pair in sizes]
    if len(sizes) != x.ndim:
        raise ConfigurationError("pad_zero needs {0} (before, after) pairs, got {1}".format(x.ndim, len(sizes)))
    if any(v < 0 for pair in sizes for v in pair):
        raise ConfigurationError("pad_zero sizes must be non-negative, got {0}".format(sizes))
    out = Tensor._wrap(np.pad(x.data, sizes, mode='constant'))
    window = tuple(slice(before, before + extent) for (before, _), extent in zip(sizes, x.shape))

    def backward_fn(grad):
        return grad[window],

    return record('pad_zero', (x,), out, backward_fn)


def bce_with_logits(logits, labels):
    """
    Elementwise -[t log sigmoid(l) + (1 - t) log(1 - sigmoid(l))] in its stable fused form.
    Labels are constants.
    """
    logits = as_tensor(logits)
    labels = np.broadcast_to(np.asarray(labels.data if isinstance(labels, Tensor) else labels, dtype=DTYPE),
                             logits.shape)
    l = logits.data
    out = Tensor._wrap(np.maximum(l, 0.0) - l * labels + np.log1p(np.exp(-np.abs(l))))

    def backward_fn(grad):
        return grad * (expit(l) - labels),

    return record('bce_with_logits', (logits,), out, backward_fn)


def _check_conv_hyper(stride, padding):
    if stride < 1:
        raise ConfigurationError("stride must be >= 1, got {0}".format(stride))
    if padding < 0:
        raise ConfigurationError("padding must be >= 0, got {0}".format(padding))


def _windows(padded, kernel_h, kernel_w, stride):
    windows = sliding_window_view(padded, (kernel_h, kernel_w), axis=(2, 3))
    return windows[:, :, ::stride, ::stride]


def _col2im(cols, shape, stride):
    """
    Scatters (N, oh, ow, C, kh, kw) columns back onto an (N, C, H, W) plane
    """
    out = np.zeros(shape, dtype=DTYPE)
    _, out_h, out_w, _, kernel_h, kernel_w = cols.shape
    for i in range(kernel_h):
        for j in range(kernel_w):
            out[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride] += \
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return out


def _pad_plane(array, padding):
    if padding == 0:
        return array
    return np.pad(array, ((0, 0), (0, 0), (padding, padding), (padding, padding)), mode='constant')


def _crop_plane(array, padding):
    if padding == 0:
        return array
    return array[:, :, padding:array.shape[2] - padding, padding:array.shape[3] - padding]


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """
    Cross-correlation of an (N, Cin, H, W) input with a (Cout, Cin, kH, kW) kernel
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_conv_hyper(stride, padding)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ConfigurationError("conv2d needs 4-d input and kernel, got {0} and {1}".format(x.shape, kernel.shape))
    if x.shape[1] != kernel.shape[1]:
        raise ConfigurationError("conv2d input has {0} channels but kernel expects {1}".format(
            x.shape[1], kernel.shape[1]))
    kernel_h, kernel_w = kernel.shape[2:]
    padded = _pad_plane(x.data, padding)
    if padded.shape[2] < kernel_h or padded.shape[3] < kernel_w:
        raise ConfigurationError("conv2d padded input {0} is smaller than kernel {1}".format(
            padded.shape[2:], kernel.shape[2:]))
    windows = _windows(padded, kernel_h, kernel_w, stride)
    values = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    inputs = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (kernel.shape[0],):
            raise ConfigurationError("conv2d bias shape {0} does not match {1} output channels".format(
                bias.shape, kernel.shape[0]))
        values = values + bias.data[None, :, None, None]
        inputs.append(bias)
    out = Tensor._wrap(np.ascontiguousarray(values))

    def backward_fn(grad):
        grad_x = grad_kernel = None
        if x.requires_grad:
            cols = np.tensordot(grad, kernel.data, axes=([1], [0]))
            grad_x = _crop_plane(_col2im(cols, padded.shape, stride), padding)
        if kernel.requires_grad:
            grad_kernel = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        grads = [grad_x, grad_kernel]
        if bias is not None:
            grads.append(grad.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return record('conv2d', inputs, out, backward_fn)


def conv_transpose2d(x, kernel, stride=1, padding=0, bias=None):
    """
    Adjoint of ``conv2d`` with respect to its input; the kernel is (Cin, Cout, kH, kW)
    where Cin matches the channels of ``x``.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    _check_conv_hyper(stride, padding)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ConfigurationError("conv_transpose2d needs 4-d input and kernel, got {0} and {1}".format(
            x.shape, kernel.shape))
    if x.shape[1] != kernel.shape[0]:
        raise ConfigurationError("conv_transpose2d input has {0} channels but kernel expects {1}".format(
            x.shape[1], kernel.shape[0]))
    n, _, height, width = x.shape
    out_channels, kernel_h, kernel_w = kernel.shape[1:]
    full_h = (height - 1) * stride + kernel_h
    full_w = (width - 1) * stride + kernel_w
    if full_h - 2 * padding < 1 or full_w - 2 * padding < 1:
        raise ConfigurationError("conv_transpose2d output would be {0}x{1}".format(
            full_h - 2 * padding, full_w - 2 * padding))
    cols = np.tensordot(x.data, kernel.data, axes=([1], [0]))
    values = _crop_plane(_col2im(cols, (n, out_channels, full_h, full_w), stride), padding)
    inputs = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (out_channels,):
            raise ConfigurationError("conv_transpose2d bias shape {0} does not match {1} output channels".format(
                bias.shape, out_channels))
        values = values + bias.data[None, :, None, None]
        inputs.append(bias)
    out = Tensor._wrap(np.ascontiguousarray(values))

    def backward_fn(grad):
        windows = _windows(_pad_plane(grad, padding), kernel_h, kernel_w, stride)
        grad_x = grad_kernel = None
        if x.requires_grad:
            grad_x = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if kernel.requires_grad:
            grad_kernel = np.tensordot(x.data, windows, axes=([0, 2, 3], [0, 2, 3]))
        grads = [grad_x, grad_kernel]
        if bias is not None:
            grads.append(grad.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return record('conv_transpose2d', inputs, out, backward_fn)


def instance_norm(x, eps=None):
    """
    Per-sample, per-channel standardization over the spatial plane, without affine parameters
    """
    x = as_tensor(x)
    eps = get_settings_value('instance_norm_eps') if eps is None else eps
    if x.ndim != 4:
        raise UsageError("instance_norm needs an (N, C, H, W) input, got {0}".format(x.shape))
    if x.shape[2] * x.shape[3] < 1:
        raise UsageError("instance_norm needs a non-empty spatial plane")
    if eps <= 0:
        raise ConfigurationError("instance_norm eps must be positive, got {0}".format(eps))
    centered = x.data - x.data.mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(np.mean(np.square(centered), axis=(2, 3), keepdims=True) + eps)
    normalized = centered * inv_std
    out = Tensor._wrap(normalized)

    def backward_fn(grad):
        grad_mean = grad.mean(axis=(2, 3), keepdims=True)
        proj = (grad * normalized).mean(axis=(2, 3), keepdims=True)
        return inv_std * (grad - grad_mean - normalized * proj),

    return record('instance_norm', (x,), out, backward_fn)
