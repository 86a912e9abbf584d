"""
Adam and the two-phase learning-rate schedule
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from contrastforge.constants import BASE_LR, BETA1, BETA2
from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.settings import get_settings_value
from contrastforge.tensor import DTYPE, Tensor

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass
class AdamState:
    """
    First and second moment buffers keyed by parameter name, plus the step counter
    """
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            m={name: np.zeros(p.shape, dtype=DTYPE) for name, p in params.items()},
            v={name: np.zeros(p.shape, dtype=DTYPE) for name, p in params.items()},
            t=0)


@dataclass
class LrSchedule:
    """
    Constant ``base_lr`` for ``constant_epochs``, then a linear decay to zero at ``total_epochs``.

    An epoch is whatever the training loop counts as one: a full pass over the
    training slices, or ``steps_per_epoch`` steps when the run config sets it.
    """
    base_lr: float = BASE_LR
    total_epochs: int = 20
    constant_epochs: int = 10

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ConfigurationError("base_lr must be positive, got {0}".format(self.base_lr))
        if not 0 < self.constant_epochs <= self.total_epochs:
            raise ConfigurationError("constant_epochs must satisfy 0 < constant_epochs <= total_epochs, "
                                     "got {0} and {1}".format(self.constant_epochs, self.total_epochs))


def lr_at_epoch(epoch, schedule):
    """
    Constant ``base_lr`` for the first ``constant_epochs``, then linear decay towards 0 at ``total_epochs``
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise UsageError("epoch {0} is outside [0, {1})".format(epoch, schedule.total_epochs))
    if epoch < schedule.constant_epochs:
        return schedule.base_lr
    return schedule.base_lr * (schedule.total_epochs - epoch) / (schedule.total_epochs - schedule.constant_epochs)


def adam_step(params, grads, state, lr, beta1=BETA1, beta2=BETA2, eps=None):
    """
    One bias-corrected Adam update.

    Neither ``params`` nor ``state`` is modified: the updated parameter set holds
    fresh leaf tensors and the state is a new object.

    :param params: ParamSet of leaf tensors
    :param grads: mapping of parameter name to gradient array; a missing or None entry counts as zero
    :return: (ParamSet, AdamState)
    """
    eps = get_settings_value('adam_eps') if eps is None else eps
    if lr < 0:
        raise ConfigurationError("learning rate must be non-negative, got {0}".format(lr))
    if set(state.m) != set(params) or set(state.v) != set(params):
        raise ConfigurationError("Adam state does not cover the same parameters as the parameter set")

    t = state.t + 1
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    updated = params.copy()
    new_m, new_v = {}, {}
    for name, param in params.items():
        grad = grads.get(name)
        grad = np.zeros(param.shape, dtype=DTYPE) if grad is None else np.asarray(grad, dtype=DTYPE)
        if grad.shape != param.shape or state.m[name].shape != param.shape or state.v[name].shape != param.shape:
            raise ConfigurationError("Shape mismatch for parameter {0}: param {1}, grad {2}, state {3}".format(
                name, param.shape, grad.shape, state.m[name].shape))
        m = beta1 * state.m[name] + (1.0 - beta1) * grad
        v = beta2 * state.v[name] + (1.0 - beta2) * np.square(grad)
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = Tensor(param.data - lr * m_hat / (np.sqrt(v_hat) + eps), requires_grad=param.requires_grad)
        new_m[name] = m
        new_v[name] = v
    log.debug("adam step %s over %s parameters at lr %s", t, len(params), lr)
    return updated, AdamState(m=new_m, v=new_v, t=t)
