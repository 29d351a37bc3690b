# -*- coding: utf-8 -*-
"""
Temporal-head cell updates for threat models

Each head kind consumes one encoded frame per time step. Gate pre-activations from the input
(x @ W_x + b_h) are computed for all frames at once by the caller; only the recurrent part runs
per step. Gate blocks are laid out contiguously along the last axis of W_x, W_h, b_h:

- VanillaRNN :  [candidate]                           h = tanh(xw + h_prev @ W_h)
- LSTM :        [input, forget, candidate, output]    c = f*c_prev + i*g, h = o*tanh(c)
- GRU :         [update, reset, candidate]            n = tanh(xw_n + r*(h_prev @ W_h_n)),
                                                      h = (1-z)*n + z*h_prev
- AvgPool :     [candidate]                           h = tanh(xw), no recurrence

Function list
-------------
- rnn_step :    Single time-step update of a temporal head
- n_gates :     Number of gate blocks for a head kind

Function reference
------------------
"""
import numpy as np

from spavid.errors import ShapeError
from spavid.tensor import Tensor, add, sub, mul, matmul, tanh, sigmoid, reshape

HEAD_KINDS = ('VanillaRNN', 'LSTM', 'GRU', 'AvgPool')

_N_GATES = {'VanillaRNN': 1, 'LSTM': 4, 'GRU': 3, 'AvgPool': 1}

_HEAD_ALIASES = {'vanillarnn': 'VanillaRNN', 'vanilla': 'VanillaRNN', 'rnn': 'VanillaRNN',
                 'lstm': 'LSTM', 'gru': 'GRU',
                 'avgpool': 'AvgPool', 'pool': 'AvgPool', 'pooling': 'AvgPool'}


def head_kind_name(kind):
    """ Convert any accepted spelling of a head kind to its canonical name """
    assert isinstance(kind,str) and (kind.lower() in _HEAD_ALIASES), \
        ValueError("Unsupported head kind '%s'. Use 'VanillaRNN','LSTM','GRU', or 'AvgPool'"
                   % kind)
    return _HEAD_ALIASES[kind.lower()]


def n_gates(kind):
    """ Number of gate blocks of size hidden_size in a head kind's weight matrices """
    return _N_GATES[head_kind_name(kind)]


def rnn_step(kind, params, h_prev, c_prev, x):
    """
    Single time-step update of a temporal head

    Parameters
    ----------
    kind : {'VanillaRNN','LSTM','GRU','AvgPool'}
        Head kind

    params : dict
        Head parameters {'W_x' : (d,G*h), 'W_h' : (h,G*h) (not used by AvgPool),
        'b_h' : (1,G*h)}, as ndarrays or Tensors

    h_prev : Tensor or array-like, shape=(h,) or (n,h)
        Previous hidden state

    c_prev : Tensor or array-like or None, shape=(h,) or (n,h)
        Previous cell state. Only used by LSTM; None is treated as zeros.

    x : Tensor or array-like, shape=(d,) or (n,d)
        Encoded frame(s)

    Returns
    -------
    h : Tensor, shape=h_prev.shape
        New hidden state

    c : Tensor or None
        New cell state (LSTM only; None for other heads)
    """
    kind = head_kind_name(kind)
    x = x if isinstance(x,Tensor) else Tensor(x)
    h_prev = h_prev if isinstance(h_prev,Tensor) else Tensor(h_prev)
    W_x = _as_param(params['W_x'])
    b_h = _as_param(params['b_h'])
    W_h = None if kind == 'AvgPool' else _as_param(params['W_h'])

    single = x.ndim == 1
    if single:
        x = reshape(x, (1,-1))
        h_prev = reshape(h_prev, (1,-1))
    if (c_prev is not None) and not isinstance(c_prev,Tensor): c_prev = Tensor(c_prev)
    if single and (c_prev is not None): c_prev = reshape(c_prev, (1,-1))

    n_hidden = W_x.shape[1] // n_gates(kind)
    if x.shape[1] != W_x.shape[0]:
        raise ShapeError("Encoded frame size does not match W_x", x.shape, W_x.shape)
    if h_prev.shape != (x.shape[0],n_hidden):
        raise ShapeError("Hidden state size does not match head", h_prev.shape,
                         (x.shape[0],n_hidden))

    xw = add(matmul(x, W_x), matmul(np.ones((x.shape[0],1)), b_h))
    h, c = _cell(kind, W_h, h_prev, c_prev, xw)

    if single:
        h = reshape(h, (-1,))
        if c is not None: c = reshape(c, (-1,))
    return h, c


def _cell(kind, W_h, h_prev, c_prev, xw):
    """
    Recurrent part of one time step, given precomputed input pre-activations

    Parameters
    ----------
    kind : str
        Canonical head kind

    W_h : Tensor, shape=(h,G*h) or None (AvgPool)

    h_prev : Tensor, shape=(n,h)

    c_prev : Tensor, shape=(n,h) or None

    xw : Tensor, shape=(n,G*h)
        x @ W_x + b_h for this step

    Returns
    -------
    h : Tensor, shape=(n,h)
    c : Tensor, shape=(n,h) or None
    """
    n_hidden = h_prev.shape[1]
    block = lambda z, k: z[:, k*n_hidden:(k+1)*n_hidden]

    if kind == 'VanillaRNN':
        return tanh(add(xw, matmul(h_prev, W_h))), None

    elif kind == 'LSTM':
        if c_prev is None: c_prev = Tensor(np.zeros(h_prev.shape))
        z = add(xw, matmul(h_prev, W_h))
        i = sigmoid(block(z,0))
        f = sigmoid(block(z,1))
        g = tanh(block(z,2))
        o = sigmoid(block(z,3))
        c = add(mul(f, c_prev), mul(i, g))
        return mul(o, tanh(c)), c

    elif kind == 'GRU':
        hu = matmul(h_prev, W_h)
        z = sigmoid(add(block(xw,0), block(hu,0)))
        r = sigmoid(add(block(xw,1), block(hu,1)))
        n = tanh(add(block(xw,2), mul(r, block(hu,2))))
        return add(mul(sub(1.0, z), n), mul(z, h_prev)), None

    elif kind == 'AvgPool':
        return tanh(xw), None

    else:
        raise ValueError("Unsupported head kind '%s'" % kind)


def _as_param(value):
    """ Wrap ndarray parameters as untracked tensors; pass tensors through """
    return value if isinstance(value,Tensor) else Tensor(value)
