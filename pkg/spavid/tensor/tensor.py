# -*- coding: utf-8 -*-
"""
Dense real tensors with reverse-mode differentiation

Overview
--------
A :class:`Tensor` wraps a float64 Numpy array of rank <= 4. Any operation whose inputs include
a tensor with `requires_grad` = True appends a record (output, parents, adjoint rule) to the
calling thread's :class:`ComputationTape`. :func:`backward` then replays the adjoint rules in
reverse recording order (which is a valid reverse topological order) and accumulates gradients
into the `grad` buffer of every reachable leaf that requires grad.

A tape is single-use: backward consumes it and installs a fresh tape for the thread. Calling
backward again on an output of a consumed tape raises :class:`spavid.errors.TapeError`.
Tapes are confined to the thread that created them, so independent attacks can run on separate
threads/processes, one tape each.

Only exact-shape elementwise operations are supported, plus a rank-0 "scalar" operand
on either side. There is no other broadcasting.

Function list
-------------
Core types
^^^^^^^^^^
- Tensor :          Dense rank <= 4 real tensor with optional gradient tracking
- ComputationTape : Ordered record of primitive operations for one backward pass
- current_tape :    Return the calling thread's active tape
- reset_tape :      Discard the calling thread's tape and start a fresh one
- backward :        Accumulate gradients of a scalar root into all reachable leaves

Elementwise arithmetic
^^^^^^^^^^^^^^^^^^^^^^
- elementwise :     Dispatch elementwise op by name ('add','sub','mul','div')
- add, sub, mul, div, neg

Linear algebra and nonlinearities
^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^^
- matmul :          Rank-2 matrix product
- activation :      Elementwise nonlinearity by name ('tanh','sigmoid','relu')
- tanh, sigmoid, relu
- softmax :         Softmax of rank-1 tensor (or each row of a rank-2 tensor)
- log :             Elementwise natural log
- clip :            Clamp values into range (gradient passes only inside range)

Reductions and structure
^^^^^^^^^^^^^^^^^^^^^^^^
- tsum, tmean :     Sum/mean over one axis or all elements
- reshape :         Change shape, keeping row-major order
- getitem :         Basic/advanced indexing (also via tensor[...])
- stack :           Stack equal-shape tensors along a new axis
- row_norms :       Euclidean norm of each row of a rank-2 tensor

Function reference
------------------
"""
import threading
import numpy as np

from scipy.special import expit

from spavid.errors import ShapeError, TapeError

MAX_RANK = 4
NORM_EPS = 1e-12

_local = threading.local()


# =============================================================================
# Computation tape
# =============================================================================
class ComputationTape:
    """
    Ordered record of primitive operations for one backward pass

    Each record is a tuple (output, parents, vjp) where `vjp` maps the gradient wrt the output
    to a tuple of gradients wrt each parent (None for parents that need no gradient).
    """
    def __init__(self):
        self.records = []
        self.consumed = False

    def __len__(self):
        return len(self.records)

    def record(self, output, parents, vjp):
        """ Append one operation to the tape """
        if self.consumed:
            raise TapeError("Cannot record onto a tape that was consumed by a backward pass")
        self.records.append((output, parents, vjp))

    def clear(self):
        """ Drop all records and mark tape as consumed """
        self.records = []
        self.consumed = True


def current_tape():
    """ Return the calling thread's active computation tape, creating it if needed """
    tape = getattr(_local, 'tape', None)
    if (tape is None) or tape.consumed:
        tape = ComputationTape()
        _local.tape = tape
    return tape


def reset_tape():
    """
    Discard the calling thread's computation tape and start a fresh one

    Any tensors recorded on the discarded tape can no longer be backpropagated through.
    """
    tape = getattr(_local, 'tape', None)
    if tape is not None: tape.clear()
    _local.tape = ComputationTape()


# =============================================================================
# Tensor type
# =============================================================================
class Tensor:
    """
    Dense real tensor of rank <= 4 with optional reverse-mode gradient tracking

    Parameters
    ----------
    data : array-like or scalar
        Tensor values. Always copied and stored as float64.

    requires_grad : bool, default: False
        If True, this tensor is a leaf whose gradient is accumulated into `grad` by
        :func:`backward`.

    Attributes
    ----------
    data : ndarray, dtype=float64
        Tensor values

    grad : ndarray or None
        Accumulated gradient, same shape as `data`. None until a backward pass reaches it.
    """
    # Make numpy defer to Tensor's reflected operators (eg 2.0*tensor)
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False):
        data = np.array(data, dtype=np.float64)
        if data.ndim > MAX_RANK:
            raise ShapeError("Tensor rank must be <= %d, got rank %d" % (MAX_RANK,data.ndim),
                             data.shape)
        self.data = data
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._is_leaf = True
        self._tape = None

    @classmethod
    def _from_op(cls, data, parents, vjp):
        """ Wrap result of a primitive op, recording it on the tape if any parent needs grad """
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out._is_leaf = False
        out.requires_grad = any(p.requires_grad for p in parents)
        out._tape = None
        if out.requires_grad:
            out._tape = current_tape()
            out._tape.record(out, parents, vjp)
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        """ Return a copy of tensor data as an ndarray """
        return self.data.copy()

    def item(self):
        """ Return value of a single-element tensor as a Python float """
        if self.data.size != 1:
            raise ShapeError("item() requires a single-element tensor", self.shape)
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        """ Reset accumulated gradient """
        self.grad = None

    def detach(self):
        """ Return a new untracked leaf tensor holding a copy of this tensor's values """
        return Tensor(self.data)

    def backward(self):
        """ Backpropagate from this (scalar) tensor. See :func:`backward` """
        backward(self)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (self.shape, self.requires_grad)

    def __len__(self):
        return len(self.data)

    def __add__(self, other):       return add(self, other)
    def __radd__(self, other):      return add(other, self)
    def __sub__(self, other):       return sub(self, other)
    def __rsub__(self, other):      return sub(other, self)
    def __mul__(self, other):       return mul(self, other)
    def __rmul__(self, other):      return mul(other, self)
    def __truediv__(self, other):   return div(self, other)
    def __rtruediv__(self, other):  return div(other, self)
    def __neg__(self):              return neg(self)
    def __matmul__(self, other):    return matmul(self, other)
    def __getitem__(self, index):   return getitem(self, index)


def _as_tensor(x):
    """ Wrap scalars/arrays as untracked tensors; pass tensors through """
    return x if isinstance(x, Tensor) else Tensor(x)


# =============================================================================
# Backward pass
# =============================================================================
def backward(root):
    """
    Accumulate gradients of a scalar root tensor into all reachable leaves

    Adjoints are replayed in reverse recording order. Every leaf with `requires_grad`
    that the root depends on has d(root)/d(leaf) added to its `grad` buffer.
    The root's tape is consumed afterwards.

    Parameters
    ----------
    root : Tensor
        Single-element tensor to differentiate

    Raises
    ------
    TapeError
        If root is not single-element, does not depend on any tensor requiring grad,
        or was recorded on a tape already consumed by a previous backward pass
    """
    if not isinstance(root, Tensor):
        raise TapeError("backward() root must be a Tensor, got %s" % type(root))
    if root.size != 1:
        raise TapeError("backward() root must be a single-element tensor, got shape %s"
                        % (root.shape,))
    if not root.requires_grad:
        raise TapeError("backward() root does not depend on any tensor with requires_grad=True")

    seed = np.ones(root.shape)

    # Root is itself a leaf -> nothing recorded, gradient is 1
    if root._is_leaf:
        root.grad = seed if root.grad is None else root.grad + seed
        return

    tape = root._tape
    if tape.consumed:
        raise TapeError("Computation tape was already consumed by a previous backward pass. "
                        "Recompute the forward pass before calling backward again.")

    grads = {id(root): seed}
    for output, parents, vjp in reversed(tape.records):
        grad_out = grads.pop(id(output), None)
        if grad_out is None: continue

        parent_grads = vjp(grad_out)
        for parent, grad in zip(parents, parent_grads):
            if (grad is None) or not parent.requires_grad: continue
            if parent._is_leaf:
                parent.grad = grad.copy() if parent.grad is None else parent.grad + grad
            else:
                key = id(parent)
                grads[key] = grad if key not in grads else grads[key] + grad

    tape.clear()
    if getattr(_local, 'tape', None) is tape: _local.tape = ComputationTape()


# =============================================================================
# Elementwise arithmetic
# =============================================================================
def _check_elementwise(kind, a, b):
    """ Exact shape match, or either operand a rank-0 scalar """
    if (a.shape != b.shape) and (a.ndim != 0) and (b.ndim != 0):
        raise ShapeError("Incompatible shapes for elementwise '%s'" % kind, a.shape, b.shape)


def _unbroadcast(grad, shape):
    """ Reduce gradient of a broadcast scalar operand back to its own shape """
    if grad.shape == shape: return grad
    return np.asarray(grad.sum()).reshape(shape)


def elementwise(kind, a, b, on_zero='raise'):
    """
    Elementwise binary arithmetic between tensors of equal shape (or tensor and scalar)

    Parameters
    ----------
    kind : {'add','sub','mul','div'}
        Operation to perform

    a, b : Tensor or scalar or array-like
        Operands. Shapes must match exactly unless one is a scalar.

    on_zero : {'raise','inf'}, default: 'raise'
        Only used for 'div'. Whether division by an exact zero raises ZeroDivisionError, or
        follows IEEE semantics (+/-Inf, NaN for 0/0).

    Returns
    -------
    out : Tensor
        Result of operation. Shape is that of the non-scalar operand.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(kind, a, b)
    x, y = a.data, b.data

    if kind == 'add':
        vjp = lambda g: (_unbroadcast(g, x.shape), _unbroadcast(g, y.shape))
        return Tensor._from_op(x + y, (a,b), vjp)

    elif kind == 'sub':
        vjp = lambda g: (_unbroadcast(g, x.shape), _unbroadcast(-g, y.shape))
        return Tensor._from_op(x - y, (a,b), vjp)

    elif kind == 'mul':
        vjp = lambda g: (_unbroadcast(g*y, x.shape), _unbroadcast(g*x, y.shape))
        return Tensor._from_op(x * y, (a,b), vjp)

    elif kind == 'div':
        assert on_zero in ('raise','inf'), \
            ValueError("Unsupported value '%s' for <on_zero>. Use 'raise' or 'inf'" % on_zero)
        if np.any(y == 0):
            if on_zero == 'raise':
                raise ZeroDivisionError("Division by tensor containing zero(s) "
                                        "(use on_zero='inf' for IEEE semantics)")
        with np.errstate(divide='ignore', invalid='ignore'):
            out = x / y
        def vjp(g):
            with np.errstate(divide='ignore', invalid='ignore'):
                return (_unbroadcast(g/y, x.shape), _unbroadcast(-g*x/(y*y), y.shape))
        return Tensor._from_op(out, (a,b), vjp)

    else:
        raise ValueError("Unsupported elementwise op '%s'. Use 'add','sub','mul', or 'div'" % kind)


def add(a, b):
    """ Elementwise a + b """
    return elementwise('add', a, b)


def sub(a, b):
    """ Elementwise a - b """
    return elementwise('sub', a, b)


def mul(a, b):
    """ Elementwise a * b """
    return elementwise('mul', a, b)


def div(a, b, on_zero='raise'):
    """ Elementwise a / b. See :func:`elementwise` for `on_zero` """
    return elementwise('div', a, b, on_zero=on_zero)


def neg(a):
    """ Elementwise -a """
    a = _as_tensor(a)
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


# =============================================================================
# Linear algebra and nonlinearities
# =============================================================================
def matmul(a, b):
    """
    Rank-2 matrix product a @ b

    Parameters
    ----------
    a : Tensor, shape=(m,k)
    b : Tensor, shape=(k,n)

    Returns
    -------
    out : Tensor, shape=(m,n)
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if (a.ndim != 2) or (b.ndim != 2):
        raise ShapeError("matmul requires rank-2 operands", a.shape, b.shape)
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul inner extents differ", a.shape, b.shape)

    x, y = a.data, b.data
    vjp = lambda g: (g @ y.T, x.T @ g)
    return Tensor._from_op(x @ y, (a,b), vjp)


def activation(kind, x):
    """
    Elementwise nonlinearity

    Parameters
    ----------
    kind : {'tanh','sigmoid','relu'}
        Nonlinearity to apply. relu's gradient at exactly 0 is 0.

    x : Tensor
        Input

    Returns
    -------
    out : Tensor, shape=x.shape
    """
    x = _as_tensor(x)
    kind = kind.lower()

    if kind == 'tanh':
        y = np.tanh(x.data)
        vjp = lambda g: (g*(1.0 - y*y),)
    elif kind == 'sigmoid':
        y = expit(x.data)
        vjp = lambda g: (g*y*(1.0 - y),)
    elif kind == 'relu':
        active = x.data > 0
        y = np.where(active, x.data, 0.0)
        vjp = lambda g: (g*active,)
    else:
        raise ValueError("Unsupported activation '%s'. Use 'tanh','sigmoid', or 'relu'" % kind)

    return Tensor._from_op(y, (x,), vjp)


def tanh(x):
    """ Elementwise hyperbolic tangent """
    return activation('tanh', x)


def sigmoid(x):
    """ Elementwise logistic sigmoid """
    return activation('sigmoid', x)


def relu(x):
    """ Elementwise rectified linear function """
    return activation('relu', x)


def softmax(x):
    """
    Softmax over the last axis of a rank-1 tensor (or each row of a rank-2 tensor)

    Uses max-subtraction for numerical stability, so eg softmax([1000,0]) is finite.

    Parameters
    ----------
    x : Tensor, shape=(n,) or (m,n)
        Logits. Last axis must be nonempty.

    Returns
    -------
    probs : Tensor, shape=x.shape
        Probabilities; each vector sums to 1
    """
    x = _as_tensor(x)
    if (x.ndim not in (1,2)) or (x.shape[-1] == 0):
        raise ShapeError("softmax requires a nonempty rank-1 or rank-2 tensor", x.shape)

    z = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    y = z / z.sum(axis=-1, keepdims=True)
    vjp = lambda g: (y*(g - (g*y).sum(axis=-1, keepdims=True)),)
    return Tensor._from_op(y, (x,), vjp)


def log(x):
    """ Elementwise natural log. Caller is responsible for keeping inputs > 0 """
    x = _as_tensor(x)
    return Tensor._from_op(np.log(x.data), (x,), lambda g: (g/x.data,))


def clip(x, lower, upper):
    """
    Clamp values into [lower,upper]

    Gradient passes through unchanged for values inside the range and is 0 outside it.
    """
    x = _as_tensor(x)
    inside = (x.data >= lower) & (x.data <= upper)
    return Tensor._from_op(np.clip(x.data, lower, upper), (x,), lambda g: (g*inside,))


# =============================================================================
# Reductions and structure
# =============================================================================
def tsum(x, axis=None):
    """
    Sum tensor elements over given axis (or all elements if axis is None)

    Returns rank-0 tensor if axis is None, otherwise tensor with `axis` removed
    """
    x = _as_tensor(x)
    shape = x.shape

    if axis is None:
        vjp = lambda g: (np.full(shape, float(np.asarray(g).reshape(-1)[0])),)
        return Tensor._from_op(x.data.sum(), (x,), vjp)

    axis = axis % x.ndim
    vjp = lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)
    return Tensor._from_op(x.data.sum(axis=axis), (x,), vjp)


def tmean(x, axis=None):
    """ Mean of tensor elements over given axis (or all elements if axis is None) """
    x = _as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis=axis), 1.0/n)


def reshape(x, shape):
    """ Change tensor shape, keeping row-major element order """
    x = _as_tensor(x)
    in_shape = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("Cannot reshape tensor to %s" % (tuple(shape),), in_shape)
    if out.ndim > MAX_RANK:
        raise ShapeError("Tensor rank must be <= %d" % MAX_RANK, out.shape)
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(in_shape),))


def getitem(x, index):
    """ Index into tensor with any Numpy index expression. Gradient scatters back into place """
    x = _as_tensor(x)
    in_shape = x.shape

    def vjp(g):
        grad = np.zeros(in_shape)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor._from_op(x.data[index], (x,), vjp)


def stack(tensors, axis=0):
    """
    Stack equal-shape tensors along a new axis

    Parameters
    ----------
    tensors : list of Tensor
        Tensors to stack. All must have the same shape.

    axis : int, default: 0
        Position of new axis in output

    Returns
    -------
    out : Tensor
    """
    tensors = [_as_tensor(t) for t in tensors]
    if len(tensors) == 0:
        raise ShapeError("stack requires at least one tensor")
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeError("stack requires tensors of identical shape", tensors[0].shape, t.shape)

    out = np.stack([t.data for t in tensors], axis=axis)
    if out.ndim > MAX_RANK:
        raise ShapeError("Tensor rank must be <= %d" % MAX_RANK, out.shape)
    axis = axis % out.ndim
    n = len(tensors)
    vjp = lambda g: tuple(np.take(g, i, axis=axis) for i in range(n))
    return Tensor._from_op(out, tuple(tensors), vjp)


def row_norms(x):
    """
    Euclidean norm of each row of a rank-2 tensor

    The adjoint for row r is x_r / max(||x_r||, 1e-12), so all-zero rows get zero gradient
    rather than NaN.

    Parameters
    ----------
    x : Tensor, shape=(m,n)

    Returns
    -------
    norms : Tensor, shape=(m,)
    """
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError("row_norms requires a rank-2 tensor", x.shape)

    norms = np.sqrt((x.data**2).sum(axis=1))
    denom = np.maximum(norms, NORM_EPS)
    vjp = lambda g: (g[:,np.newaxis] * x.data / denom[:,np.newaxis],)
    return Tensor._from_op(norms, (x,), vjp)
