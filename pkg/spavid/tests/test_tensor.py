""" Unit tests for tensor subpackage: Tensor ops, backward pass, VTEN codec, gradient checks """
import os
import struct
import threading
import pytest
import numpy as np

from spavid.errors import ShapeError, TapeError, FormatError, UnsupportedVersionError
from spavid.tensor import Tensor, current_tape, reset_tape, backward, elementwise, \
                          add, sub, mul, div, neg, matmul, activation, softmax, log, clip, \
                          tsum, tmean, reshape, getitem, stack, row_norms, \
                          encode_tensor, decode_tensor, save_tensor, load_tensor, \
                          numerical_gradient, max_relative_error, check_gradient


@pytest.fixture(autouse=True)
def fresh_tape():
    """ Start each test with a fresh computation tape """
    reset_tape()
    yield
    reset_tape()


# =============================================================================
# Unit tests for Tensor type and backward pass
# =============================================================================
def test_tensor_basics():
    """ Unit tests for Tensor construction and accessors """
    data = np.arange(6.0).reshape(2,3)
    t = Tensor(data)
    data[0,0] = 99      # Ensure tensor holds its own copy of input data
    assert t.shape == (2,3)
    assert t.ndim == 2
    assert t.size == 6
    assert t.data.dtype == np.float64
    assert t.data[0,0] == 0
    assert not t.requires_grad and t.grad is None
    assert Tensor(3.5).item() == 3.5

    # Rank > 4 is rejected; rank 4 is fine
    Tensor(np.zeros((1,1,1,1)))
    with pytest.raises(ShapeError):
        Tensor(np.zeros((1,1,1,1,1)))
    with pytest.raises(ShapeError):
        t.item()


def test_backward_product():
    """ Product of two tensors: gradients are each other's values """
    a = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    b = Tensor([4.0, 5.0, 6.0], requires_grad=True)
    tsum(mul(a, b)).backward()
    assert np.array_equal(a.grad, [4.0, 5.0, 6.0])
    assert np.array_equal(b.grad, [1.0, 2.0, 3.0])


def test_backward_reused_leaf():
    """ Gradients of a leaf used several times accumulate across all uses """
    x = Tensor(2.0, requires_grad=True)
    y = x*x + 3.0*x          # dy/dx = 2x + 3 = 7
    y.backward()
    assert np.isclose(x.grad, 7.0)


def test_backward_leaf_root():
    """ Leaf root tensor gets gradient 1 """
    x = Tensor(5.0, requires_grad=True)
    backward(x)
    assert x.grad == 1.0


def test_backward_errors():
    """ backward() rejects bad roots and consumed tapes """
    x = Tensor([1.0, 2.0], requires_grad=True)

    # Non-scalar root
    with pytest.raises(TapeError):
        mul(x, 2.0).backward()
    reset_tape()

    # Root not depending on any tracked tensor
    with pytest.raises(TapeError):
        tsum(Tensor([1.0, 2.0])).backward()

    # Not a tensor
    with pytest.raises(TapeError):
        backward(np.ones(1))

    # Second backward pass on output of a consumed tape
    y = tsum(mul(x, x))
    y.backward()
    with pytest.raises(TapeError):
        y.backward()

    # Consumed tape was replaced, so a new forward pass works
    x.zero_grad()
    tsum(mul(x, x)).backward()
    assert np.array_equal(x.grad, [2.0, 4.0])


def test_untracked_ops_not_recorded():
    """ Ops on tensors that don't require grad leave the tape empty """
    tsum(mul(Tensor([1.0, 2.0]), 3.0))
    assert len(current_tape()) == 0


def test_tapes_per_thread():
    """ Each thread records onto its own tape """
    main_tape = current_tape()
    tapes = []
    thread = threading.Thread(target=lambda: tapes.append(current_tape()))
    thread.start()
    thread.join()
    assert tapes[0] is not main_tape


# =============================================================================
# Unit tests for elementwise ops
# =============================================================================
@pytest.mark.parametrize('kind, result',
                         [('add', [5.0, 7.0]),
                          ('sub', [-3.0, -3.0]),
                          ('mul', [4.0, 10.0]),
                          ('div', [0.25, 0.4])])
def test_elementwise(kind, result):
    """ Unit tests for elementwise() dispatch function """
    a = Tensor([1.0, 2.0])
    b = Tensor([4.0, 5.0])
    assert np.allclose(elementwise(kind, a, b).data, result)

    with pytest.raises(ShapeError):
        elementwise(kind, a, Tensor([1.0, 2.0, 3.0]))

    with pytest.raises(ValueError):
        elementwise('pow', a, b)


def test_elementwise_scalar_operand():
    """ Rank-0 operand on either side broadcasts, and its gradient sums """
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    s = Tensor(2.0, requires_grad=True)
    tsum(mul(x, s)).backward()
    assert np.array_equal(x.grad, [2.0, 2.0, 2.0])
    assert np.isclose(s.grad, 6.0)

    assert np.array_equal((1.0 - Tensor([1.0, 3.0])).data, [0.0, -2.0])
    assert np.array_equal((2.0*Tensor([1.0, 3.0])).data, [2.0, 6.0])
    assert np.array_equal(neg(Tensor([1.0, -3.0])).data, [-1.0, 3.0])


def test_div_by_zero():
    """ Division by zero raises by default, or follows IEEE semantics if configured """
    with pytest.raises(ZeroDivisionError):
        div(Tensor([1.0, 2.0]), Tensor([0.0, 1.0]))

    out = div(Tensor([1.0, 0.0]), Tensor([0.0, 0.0]), on_zero='inf')
    assert np.isinf(out.data[0])
    assert np.isnan(out.data[1])


# =============================================================================
# Unit tests for linear algebra and nonlinearities
# =============================================================================
def test_matmul():
    """ Unit tests for matmul() """
    a = Tensor(np.arange(6.0).reshape(2,3), requires_grad=True)
    b = Tensor(np.ones((3,4)), requires_grad=True)
    out = matmul(a, b)
    assert out.shape == (2,4)
    assert np.array_equal(out.data, a.data @ b.data)

    tsum(out).backward()
    assert np.array_equal(a.grad, np.full((2,3), 4.0))
    assert np.array_equal(b.grad, np.tile(a.data.sum(axis=0)[:,np.newaxis], (1,4)))

    # Mismatched inner extents -> both shapes named in error message
    with pytest.raises(ShapeError, match=r'\(2, 3\).*\(2, 3\)'):
        matmul(Tensor(np.ones((2,3))), Tensor(np.ones((2,3))))
    with pytest.raises(ShapeError):
        matmul(Tensor(np.ones(3)), Tensor(np.ones((3,1))))


@pytest.mark.parametrize('kind', ['tanh', 'sigmoid', 'relu'])
def test_activation(kind):
    """ Activation gradients match finite differences away from relu's kink """
    x = np.array([-1.5, -0.3, 0.4, 2.0])
    rel_err, _, _ = check_gradient(lambda t: tsum(activation(kind, t)), x)
    assert rel_err < 1e-6

    with pytest.raises(ValueError):
        activation('elu', Tensor(x))


def test_relu_gradient_at_zero():
    """ relu gradient at exactly 0 is 0 """
    x = Tensor([0.0, 1.0], requires_grad=True)
    tsum(activation('relu', x)).backward()
    assert np.array_equal(x.grad, [0.0, 1.0])


def test_softmax():
    """ Unit tests for softmax() """
    probs = softmax(Tensor([1000.0, 0.0]))
    assert np.all(np.isfinite(probs.data))
    assert np.allclose(probs.data, [1.0, 0.0])

    probs = softmax(Tensor(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])))
    assert np.allclose(probs.data.sum(axis=1), 1.0)
    assert np.allclose(probs.data[1], 1.0/3)

    weights = np.array([0.2, -1.0, 0.5])
    rel_err, _, _ = check_gradient(lambda t: tsum(mul(softmax(t), weights)),
                                   np.array([0.1, 0.7, -0.4]))
    assert rel_err < 1e-6

    with pytest.raises(ShapeError):
        softmax(Tensor(np.zeros(0)))
    with pytest.raises(ShapeError):
        softmax(Tensor(np.zeros((2,2,2))))


def test_log_and_clip():
    """ Unit tests for log() and clip() """
    x = Tensor([0.5, 2.0], requires_grad=True)
    tsum(log(x)).backward()
    assert np.allclose(x.grad, [2.0, 0.5])

    # Gradient passes only inside the clip range
    x = Tensor([-1.0, 0.5, 2.0], requires_grad=True)
    out = clip(x, 0.0, 1.0)
    assert np.array_equal(out.data, [0.0, 0.5, 1.0])
    tsum(out).backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 0.0])


# =============================================================================
# Unit tests for reductions and structural ops
# =============================================================================
def test_reductions():
    """ Unit tests for tsum() and tmean() """
    data = np.arange(12.0).reshape(3,4)
    assert tsum(Tensor(data)).item() == data.sum()
    assert np.array_equal(tsum(Tensor(data), axis=0).data, data.sum(axis=0))
    assert np.array_equal(tsum(Tensor(data), axis=-1).data, data.sum(axis=1))
    assert np.isclose(tmean(Tensor(data)).item(), data.mean())

    x = Tensor(data, requires_grad=True)
    tsum(tmean(x, axis=1)).backward()
    assert np.allclose(x.grad, 0.25)


def test_structural_ops():
    """ Unit tests for reshape(), getitem(), stack() """
    x = Tensor(np.arange(6.0), requires_grad=True)
    y = reshape(x, (2,3))
    assert y.shape == (2,3)
    with pytest.raises(ShapeError):
        reshape(x, (4,2))

    # Indexing with repeated index scatters gradients additively
    z = getitem(x, np.array([0, 0, 5]))
    tsum(z).backward()
    assert np.array_equal(x.grad, [2.0, 0, 0, 0, 0, 1.0])

    a = Tensor(np.ones(3), requires_grad=True)
    b = Tensor(2*np.ones(3), requires_grad=True)
    s = stack([a, b], axis=1)
    assert s.shape == (3,2)
    tsum(mul(s, Tensor(np.array([[1.0, 10.0]]*3)))).backward()
    assert np.array_equal(a.grad, np.ones(3))
    assert np.array_equal(b.grad, 10*np.ones(3))

    with pytest.raises(ShapeError):
        stack([Tensor(np.ones(2)), Tensor(np.ones(3))])
    with pytest.raises(ShapeError):
        stack([])


def test_row_norms():
    """ Unit tests for row_norms(): values, gradient, and guarded zero rows """
    x = Tensor(np.array([[3.0, 4.0], [0.0, 0.0]]), requires_grad=True)
    norms = row_norms(x)
    assert np.array_equal(norms.data, [5.0, 0.0])
    tsum(norms).backward()
    assert np.allclose(x.grad, [[0.6, 0.8], [0.0, 0.0]])
    assert np.all(np.isfinite(x.grad))

    with pytest.raises(ShapeError):
        row_norms(Tensor(np.ones(3)))


# =============================================================================
# Unit tests for VTEN codec
# =============================================================================
@pytest.mark.parametrize('shape', [(), (3,), (2,3), (2,1,3), (2,2,2,2), (0,3)])
def test_vten_round_trip(shape):
    """ float32-representable values round-trip bit-exactly for all ranks, incl. empty """
    data = np.arange(int(np.prod(shape)), dtype=np.float32).reshape(shape) / 8.0
    buf = encode_tensor(data)
    decoded, end = decode_tensor(buf)
    assert end == len(buf)
    assert decoded.shape == shape
    assert np.array_equal(decoded, data)


def test_vten_layout():
    """ Byte layout: magic, version, rank, u32 extents, f32 data, all little-endian """
    buf = encode_tensor(np.array([[1.0, 2.0]]))
    assert buf[:4] == b'VTEN'
    assert buf[4] == 1 and buf[5] == 2
    assert struct.unpack('<II', buf[6:14]) == (1, 2)
    assert struct.unpack('<2f', buf[14:]) == (1.0, 2.0)
    assert len(buf) == 6 + 4*2 + 4*2


def test_vten_errors():
    """ Malformed buffers raise FormatError (or UnsupportedVersionError) """
    buf = encode_tensor(np.ones((2,2)))

    with pytest.raises(FormatError):
        decode_tensor(b'XTEN' + buf[4:])
    with pytest.raises(UnsupportedVersionError):
        decode_tensor(buf[:4] + bytes([2]) + buf[5:])
    with pytest.raises(FormatError):
        decode_tensor(buf[:-1])
    with pytest.raises(FormatError):
        decode_tensor(buf[:7])
    with pytest.raises(FormatError):
        decode_tensor(buf[:5] + bytes([5]) + buf[6:])
    with pytest.raises(ShapeError):
        encode_tensor(np.ones((1,1,1,1,1)))

    # Extents whose product overflows the element limit
    overflow = b'VTEN' + bytes([1, 2]) + struct.pack('<II', 2**31, 2**31)
    with pytest.raises(FormatError):
        decode_tensor(overflow)


def test_vten_files(tmp_path):
    """ Unit tests for save_tensor()/load_tensor() """
    data = np.full((2,3,4,1), 0.5)
    filename = os.path.join(str(tmp_path), 'sub', 'x.vten')
    save_tensor(filename, data)
    assert np.array_equal(load_tensor(filename, rank=4), data)

    with pytest.raises(FormatError, match='rank'):
        load_tensor(filename, rank=3)

    with open(filename, 'ab') as f:
        f.write(b'\x00')
    with pytest.raises(FormatError):
        load_tensor(filename)


# =============================================================================
# Unit tests for gradient-check utilities
# =============================================================================
def test_numerical_gradient():
    """ Central differences of a quadratic are exact up to rounding """
    x = np.array([1.0, -2.0, 0.5])
    x_orig = x.copy()
    grad = numerical_gradient(lambda v: np.sum(v**2), x)
    assert np.array_equal(x, x_orig)
    assert np.allclose(grad, 2*x, atol=1e-8)


def test_max_relative_error():
    """ Unit tests for max_relative_error() """
    assert max_relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert np.isclose(max_relative_error([1.0, 2.0], [1.0, 2.2]), 0.2/2.2)
    assert max_relative_error([0.0], [0.0]) == 0.0


def test_check_gradient_composite():
    """ Gradient of a small composite network matches finite differences """
    W = np.array([[0.3, -0.2], [0.1, 0.4], [-0.5, 0.2]])

    def fn(x):
        hidden = activation('tanh', matmul(reshape(x, (1,3)), W))
        return tsum(row_norms(hidden))

    rel_err, analytic, numeric = check_gradient(fn, np.array([0.2, -0.4, 0.9]))
    assert analytic.shape == (3,)
    assert rel_err < 1e-6


def test_backward_linear():
    """ Gradient of a*f + b*g equals a*grad(f) + b*grad(g) on a shared leaf """
    data = np.random.default_rng(4).uniform(-2, 2, size=(3,4))
    f = lambda x: tsum(mul(x, x))
    g = lambda x: tsum(activation('tanh', matmul(x, np.ones((4,2)))))

    grads = []
    for fn in (f, g, lambda x: add(mul(f(x), 2.5), mul(g(x), -0.7))):
        x = Tensor(data, requires_grad=True)
        fn(x).backward()
        grads.append(x.grad)
    assert np.allclose(grads[2], 2.5*grads[0] - 0.7*grads[1], rtol=0, atol=1e-9)


# Differentiable ops as functions of a (3,4) tensor, and input transforms keeping inputs
# away from each op's kinks and singularities
_W = np.random.default_rng(0).uniform(-1, 1, size=(3,4))
_OPS = [
    ('add',      lambda x: add(x, _W),                          None),
    ('sub',      lambda x: sub(_W, x),                          None),
    ('mul',      lambda x: mul(x, x),                           None),
    ('div',      lambda x: div(_W, x),                          lambda v: np.sign(v)*(0.5 + np.abs(v))),
    ('neg',      lambda x: neg(x),                              None),
    ('matmul',   lambda x: matmul(x, _W.T),                     None),
    ('tanh',     lambda x: activation('tanh', x),               None),
    ('sigmoid',  lambda x: activation('sigmoid', x),            None),
    ('relu',     lambda x: activation('relu', x),               lambda v: np.sign(v)*(0.1 + np.abs(v))),
    ('softmax',  lambda x: softmax(x),                          None),
    ('log',      lambda x: log(x),                              lambda v: 0.5 + np.abs(v)),
    ('clip',     lambda x: clip(x, -1.0, 1.0),
                 lambda v: np.where(np.abs(np.abs(v) - 1) < 0.05, 0.5*v, v)),
    ('tsum',     lambda x: tsum(x, axis=0),                     None),
    ('tmean',    lambda x: tmean(x, axis=1),                    None),
    ('reshape',  lambda x: reshape(x, (4,3)),                   None),
    ('getitem',  lambda x: getitem(x, (slice(None), [0,2,2])),  None),
    ('stack',    lambda x: stack([x, mul(x, x)], axis=1),       None),
    ('row_norms', lambda x: row_norms(x),                       None),
]


def test_random_gradient_checks():
    """ Every differentiable op passes central finite differences in 100 seeded trials """
    failures = []
    for trial in range(100):
        name, op, transform = _OPS[trial % len(_OPS)]
        rng = np.random.default_rng(trial)
        x0 = rng.uniform(-2, 2, size=(3,4))
        if transform is not None: x0 = transform(x0)

        def fn(x):
            out = op(x)
            weights = np.random.default_rng(100 + trial).uniform(-1, 1, size=out.shape)
            return tsum(mul(out, weights))

        rel_err, _, _ = check_gradient(fn, x0, h=1e-4)
        if not rel_err < 1e-3: failures.append((trial, name, rel_err))
    assert failures == []
