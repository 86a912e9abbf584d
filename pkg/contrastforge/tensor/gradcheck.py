"""
Finite-difference verification of recorded gradients
"""
import logging

import numpy as np

from contrastforge.exceptions import UsageError
from contrastforge.tensor.base import DTYPE, Tape, Tensor, backward

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


def analytic_gradient(f, point):
    """
    Gradient of the scalar ``f`` at ``point`` obtained from one backward pass
    """
    leaf = Tensor(point, requires_grad=True)
    with Tape() as tape:
        loss = f(leaf)
    if not isinstance(loss, Tensor) or loss.ndim != 0:
        raise UsageError("grad_check needs a scalar-valued function")
    if loss.is_leaf:
        # f does not depend on its argument
        return np.zeros(leaf.shape, dtype=DTYPE)
    backward(tape, loss)
    return leaf.grad if leaf.grad is not None else np.zeros(leaf.shape, dtype=DTYPE)


def numeric_gradient(f, point, step):
    base = np.array(point, dtype=DTYPE)
    grad = np.zeros(base.shape, dtype=DTYPE)
    for index in np.ndindex(base.shape):
        original = base[index]
        base[index] = original + step
        upper = f(Tensor(base)).item()
        base[index] = original - step
        lower = f(Tensor(base)).item()
        base[index] = original
        grad[index] = (upper - lower) / (2.0 * step)
    return grad


def grad_check(f, point, step=1e-3):
    """
    Compares the recorded gradient of ``f`` at ``point`` with central differences.

    :param f: callable mapping a Tensor to a scalar Tensor
    :param point: Tensor or array-like evaluation point
    :param step: finite-difference step
    :return: the worst elementwise relative error, with denominator max(|a|, |n|, 1e-8)
    """
    point = point.data if isinstance(point, Tensor) else np.asarray(point, dtype=DTYPE)
    analytic = analytic_gradient(f, point)
    numeric = numeric_gradient(f, point, step)
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    error = float(np.max(np.abs(analytic - numeric) / denominator)) if analytic.size else 0.0
    log.debug("grad_check over %s elements: max relative error %s", analytic.size, error)
    return error
