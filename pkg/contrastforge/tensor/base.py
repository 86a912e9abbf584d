"""
Tensors and the recording tape
"""
import contextvars
import logging

import numpy as np

from contrastforge.exceptions import UsageError
from contrastforge.settings import get_settings_value

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

DTYPE = np.dtype(get_settings_value('default_dtype'))

_active_tapes = contextvars.ContextVar('contrastforge_active_tapes', default=())


class Tensor(object):
    """
    An n-dimensional real array with an optional gradient slot.

    The data buffer is read-only once the tensor exists; only ``grad`` changes,
    and only through ``backward``.
    """

    def __init__(self, data, requires_grad=False):
        array = np.array(data, dtype=DTYPE)
        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.grad = None
        self._record = None

    @classmethod
    def _wrap(cls, array):
        """
        Wraps a freshly computed array without copying it
        """
        tensor = cls.__new__(cls)
        array = np.asarray(array, dtype=DTYPE)
        array.setflags(write=False)
        tensor.data = array
        tensor.requires_grad = False
        tensor.grad = None
        tensor._record = None
        return tensor

    def __repr__(self):
        return "Tensor<shape={0}, requires_grad={1}>".format(self.shape, self.requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._record is None

    def item(self):
        if self.data.size != 1:
            raise UsageError("item() needs a single-element tensor, got shape {0}".format(self.shape))
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        """
        Returns a tensor sharing the values but cut from any recorded graph
        """
        return Tensor._wrap(self.data)

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        from contrastforge.tensor import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from contrastforge.tensor import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from contrastforge.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from contrastforge.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from contrastforge.tensor import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from contrastforge.tensor import ops
        return ops.mul(other, self)

    def __neg__(self):
        from contrastforge.tensor import ops
        return ops.mul(self, -1.0)


class Record(object):
    """
    One primitive operation on the tape: its inputs, its output and the
    closure that maps the output gradient to input gradients.
    """
    __slots__ = ('name', 'inputs', 'output', 'backward_fn')

    def __init__(self, name, inputs, output, backward_fn):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn

    def __repr__(self):
        return "Record<{0}>".format(self.name)


class Tape(object):
    """
    Ordered list of recorded primitives.

    A tape records while it is entered as a context manager. It may be
    re-entered to keep recording onto the same graph, and it is consumed by
    ``backward``.
    """

    def __init__(self):
        self.records = []
        self.consumed = False
        self._tokens = []

    def __repr__(self):
        return "Tape<records={0}, consumed={1}>".format(len(self.records), self.consumed)

    def __len__(self):
        return len(self.records)

    def __enter__(self):
        if self.consumed:
            raise UsageError("This tape was already consumed by backward")
        self._tokens.append(_active_tapes.set(_active_tapes.get() + (self,)))
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        _active_tapes.reset(self._tokens.pop())
        return False

    def append(self, record):
        self.records.append(record)


def current_tape():
    """
    Returns the innermost recording tape, or None
    """
    tapes = _active_tapes.get()
    return tapes[-1] if tapes else None


def record(name, inputs, output, backward_fn):
    """
    Puts ``output`` on the active tape when any input needs a gradient
    """
    tape = current_tape()
    if tape is None or not any(t.requires_grad for t in inputs):
        return output
    output.requires_grad = True
    output._record = Record(name, tuple(inputs), output, backward_fn)
    tape.append(output._record)
    return output


def backward(tape, loss):
    """
    Replays ``tape`` in reverse and accumulates d(loss)/d(leaf) into every
    leaf tensor that requires a gradient. The tape is consumed.
    """
    if not isinstance(loss, Tensor) or loss.ndim != 0:
        raise UsageError("backward needs a scalar loss, got {0}".format(
            loss.shape if isinstance(loss, Tensor) else type(loss).__name__))
    if tape.consumed:
        raise UsageError("This tape was already consumed by backward")
    if loss._record is None or not any(r is loss._record for r in tape.records):
        raise UsageError("The loss was not recorded on this tape")

    grads = {id(loss): np.ones((), dtype=DTYPE)}
    for rec in reversed(tape.records):
        grad_out = grads.pop(id(rec.output), None)
        if grad_out is None:
            continue
        for tensor, grad_in in zip(rec.inputs, rec.backward_fn(grad_out)):
            if grad_in is None or not tensor.requires_grad:
                continue
            if tensor._record is None:
                tensor.grad = np.array(grad_in, dtype=DTYPE) if tensor.grad is None else tensor.grad + grad_in
            else:
                key = id(tensor)
                grads[key] = grads[key] + grad_in if key in grads else grad_in

    log.debug("backward replayed %s records", len(tape.records))
    tape.records = []
    tape.consumed = True


def zero_grad(tensors):
    for tensor in tensors:
        tensor.zero_grad()
