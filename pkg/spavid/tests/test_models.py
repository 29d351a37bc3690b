""" Unit tests for models subpackage: threat model forward passes, training, model files """
import os
import pytest
import numpy as np

from spavid.errors import ShapeError, FormatError, UnsupportedVersionError, DivergenceError
from spavid.tensor import Tensor, reset_tape, getitem, tsum, mul, check_gradient
from spavid.models import HEAD_KINDS, head_kind_name, n_gates, rnn_step, param_shapes, \
                          init_model, forward, forward_batch, predict, predict_labels, \
                          train, evaluate, direction_accuracy, save_model, load_model

from spavid.tests.data_fixtures import tiny_videos, tiny_models, model_labels, \
                                       MISSING_ARG_ERRS, FRAME_SHAPE, N_FRAMES, N_CLASSES, \
                                       HIDDEN_SIZE, ENCODER_DIM


@pytest.fixture(autouse=True)
def fresh_tape():
    """ Start each test with a fresh computation tape """
    reset_tape()
    yield
    reset_tape()


# =============================================================================
# Unit tests for model construction
# =============================================================================
@pytest.mark.parametrize('kind, gates',
                         [('VanillaRNN',1), ('LSTM',4), ('GRU',3), ('AvgPool',1)])
def test_param_shapes(kind, gates):
    """ Unit tests for parameter names/shapes of each head kind """
    shapes = param_shapes(kind, 16, N_CLASSES, hidden_size=HIDDEN_SIZE, encoder_dim=ENCODER_DIM)
    names = ['W_enc','b_enc','W_x','W_h','b_h','W_cls','b_cls']
    if kind == 'AvgPool': names.remove('W_h')
    assert list(shapes.keys()) == names
    assert n_gates(kind) == gates
    assert shapes['W_enc'] == (16,ENCODER_DIM)
    assert shapes['W_x'] == (ENCODER_DIM,gates*HIDDEN_SIZE)
    assert shapes['b_h'] == (1,gates*HIDDEN_SIZE)
    assert shapes['W_cls'] == (HIDDEN_SIZE,N_CLASSES)
    if kind != 'AvgPool': assert shapes['W_h'] == (HIDDEN_SIZE,gates*HIDDEN_SIZE)


def test_head_kind_name():
    """ Unit tests for head kind aliases """
    assert head_kind_name('lstm') == 'LSTM'
    assert head_kind_name('Pool') == 'AvgPool'
    assert head_kind_name('rnn') == 'VanillaRNN'
    assert head_kind_name('gru') == 'GRU'
    with pytest.raises(MISSING_ARG_ERRS):
        head_kind_name('transformer')


def test_init_model():
    """ Unit tests for seeded model initialization """
    model = init_model('GRU', FRAME_SHAPE, N_CLASSES, hidden_size=HIDDEN_SIZE,
                       encoder_dim=ENCODER_DIM, seed=7)
    model2 = init_model('GRU', FRAME_SHAPE, N_CLASSES, hidden_size=HIDDEN_SIZE,
                        encoder_dim=ENCODER_DIM, seed=7)
    model3 = init_model('GRU', FRAME_SHAPE, N_CLASSES, hidden_size=HIDDEN_SIZE,
                        encoder_dim=ENCODER_DIM, seed=8)

    assert model.head_kind == 'GRU'
    assert model.frame_shape == FRAME_SHAPE
    assert model.n_features == 16
    assert model.param_names == list(param_shapes('GRU', 16, N_CLASSES, HIDDEN_SIZE,
                                                  ENCODER_DIM).keys())
    for name in model.params:
        assert np.array_equal(model.params[name], model2.params[name])
        # All weights lie within the fan-in bound and are float32-representable
        assert np.all(np.abs(model.params[name]) <= 1.0/np.sqrt(ENCODER_DIM) + 1e-7)
        assert np.array_equal(model.params[name].astype(np.float32), model.params[name])
    assert not np.array_equal(model.params['W_enc'], model3.params['W_enc'])
    assert model.all_finite()

    # copy() is deep
    clone = model.copy()
    clone.params['W_cls'][0,0] += 1
    assert clone.params['W_cls'][0,0] != model.params['W_cls'][0,0]

    # Invalid frame shape and class counts raise errors
    with pytest.raises(MISSING_ARG_ERRS):
        init_model('GRU', (4,4), N_CLASSES)
    with pytest.raises(MISSING_ARG_ERRS):
        init_model('GRU', FRAME_SHAPE, 1)


# =============================================================================
# Unit tests for forward passes
# =============================================================================
@pytest.mark.parametrize('kind', HEAD_KINDS)
def test_forward(tiny_models, tiny_videos, kind):
    """ Unit tests for single-clip and batched forward passes """
    model = tiny_models[kind]
    videos = tiny_videos

    frame_probs, video_probs = forward_batch(model, videos)
    assert frame_probs.shape == (len(videos), N_FRAMES, N_CLASSES)
    assert video_probs.shape == (len(videos), N_CLASSES)
    assert np.allclose(frame_probs.data.sum(axis=-1), 1)
    assert np.allclose(video_probs.data, frame_probs.data.mean(axis=1))

    # Running each clip alone gives the same result as running the batch
    for i_clip,video in enumerate(videos):
        pred = forward(model, video)
        assert np.allclose(pred.frame_probs, frame_probs.data[i_clip], rtol=0, atol=1e-12)
        assert np.allclose(pred.video_probs, video_probs.data[i_clip], rtol=0, atol=1e-12)
        assert pred.video_label == np.argmax(pred.video_probs)
        assert np.array_equal(pred.frame_labels, pred.frame_probs.argmax(axis=-1))
        assert pred.video_probs_tensor is None

    preds = predict(model, videos)
    video_labels, frame_labels = predict_labels(model, videos)
    assert len(preds) == len(videos)
    assert np.array_equal(video_labels, [p.video_label for p in preds])
    assert frame_labels.shape == (len(videos), N_FRAMES)

    # Flattened-frame input is accepted too
    _, video_probs2 = forward_batch(model, videos.reshape(len(videos), N_FRAMES, -1))
    assert np.array_equal(video_probs2.data, video_probs.data)


@pytest.mark.parametrize('kind', HEAD_KINDS)
def test_forward_causal(tiny_models, tiny_videos, kind):
    """ Changing a late frame never changes earlier frame predictions """
    model = tiny_models[kind]
    video = tiny_videos[0].copy()
    before = forward(model, video).frame_probs

    video[-1] = 1.0 - video[-1]
    after = forward(model, video).frame_probs
    assert np.array_equal(before[:-1], after[:-1])
    assert not np.allclose(before[-1], after[-1])

    # AvgPool head has no recurrence, so earlier frames don't affect later ones either
    video = tiny_videos[0].copy()
    video[0] = 1.0 - video[0]
    after = forward(model, video).frame_probs
    if kind == 'AvgPool':
        assert np.array_equal(before[1:], after[1:])
    else:
        assert not np.allclose(before[1:], after[1:])


def test_frame_permutation(tiny_models, tiny_videos):
    """ AvgPool video prediction ignores frame order; recurrent heads depend on it """
    video = tiny_videos[0]
    permuted = video[[2,0,1]]
    pooled = tiny_models['AvgPool']
    assert np.allclose(forward(pooled, permuted).video_probs, forward(pooled, video).video_probs,
                       rtol=0, atol=1e-6)
    lstm = tiny_models['LSTM']
    assert not np.allclose(forward(lstm, permuted).video_probs, forward(lstm, video).video_probs,
                           rtol=0, atol=1e-6)


def test_forward_gradient(tiny_models, tiny_videos):
    """ Video probabilities are differentiable wrt a Tensor input """
    model = tiny_models['LSTM']
    video = Tensor(tiny_videos[0], requires_grad=True)
    pred = forward(model, video)
    assert pred.video_probs_tensor is not None
    assert np.allclose(pred.video_probs_tensor.data, pred.video_probs)

    getitem(pred.video_probs_tensor, 0).backward()
    assert video.grad.shape == tiny_videos[0].shape
    assert np.any(video.grad != 0)


def test_forward_errors(tiny_models, tiny_videos):
    """ Mismatched input shapes raise ShapeError """
    model = tiny_models['GRU']
    with pytest.raises(ShapeError):
        forward(model, tiny_videos[0][:,:3])
    with pytest.raises(ShapeError):
        forward(model, tiny_videos[0][0])
    with pytest.raises(ShapeError):
        forward_batch(model, np.zeros((2,N_FRAMES,15)))
    with pytest.raises(ShapeError):
        forward_batch(model, np.zeros((2,0,16)))


@pytest.mark.parametrize('kind', HEAD_KINDS)
def test_rnn_step(tiny_models, kind):
    """ Single-vector and batched rnn_step agree """
    model = tiny_models[kind]
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(3,ENCODER_DIM))
    h_prev = rng.uniform(-0.5, 0.5, size=(3,HIDDEN_SIZE))
    c_prev = rng.uniform(-0.5, 0.5, size=(3,HIDDEN_SIZE)) if kind == 'LSTM' else None

    h, c = rnn_step(kind, model.params, h_prev, c_prev, x)
    assert h.shape == (3,HIDDEN_SIZE)
    assert np.all(np.abs(h.data) < 1)
    assert (c is not None) == (kind == 'LSTM')

    h0, _ = rnn_step(kind, model.params, h_prev[0], None if c_prev is None else c_prev[0], x[0])
    assert h0.shape == (HIDDEN_SIZE,)
    assert np.allclose(h0.data, h.data[0], rtol=0, atol=1e-12)

    with pytest.raises(ShapeError):
        rnn_step(kind, model.params, h_prev, c_prev, x[:,:-1])
    with pytest.raises(ShapeError):
        rnn_step(kind, model.params, h_prev[:,:-1], c_prev, x)


def test_rnn_step_zero_inputs(tiny_models):
    """ Zero weights/bias give h = 0; LSTM with zero input, state, and bias gives c = h = 0 """
    zeros = {name: np.zeros_like(value) for name,value in tiny_models['VanillaRNN'].params.items()}
    x = np.random.default_rng(1).uniform(-1, 1, size=ENCODER_DIM)
    h, _ = rnn_step('VanillaRNN', zeros, np.ones(HIDDEN_SIZE), None, x)
    assert np.array_equal(h.data, np.zeros(HIDDEN_SIZE))

    params = dict(tiny_models['LSTM'].params)
    params['b_h'] = np.zeros_like(params['b_h'])
    h, c = rnn_step('LSTM', params, np.zeros(HIDDEN_SIZE), np.zeros(HIDDEN_SIZE),
                    np.zeros(ENCODER_DIM))
    assert np.array_equal(c.data, np.zeros(HIDDEN_SIZE))
    assert np.array_equal(h.data, np.zeros(HIDDEN_SIZE))


@pytest.mark.parametrize('kind', HEAD_KINDS)
def test_rnn_step_gradient(tiny_models, kind):
    """ Gradient of new hidden state wrt encoded frame matches finite differences """
    model = tiny_models[kind]
    rng = np.random.default_rng(2)
    h_prev = rng.uniform(-0.5, 0.5, size=HIDDEN_SIZE)
    c_prev = rng.uniform(-0.5, 0.5, size=HIDDEN_SIZE) if kind == 'LSTM' else None
    weights = rng.uniform(-1, 1, size=HIDDEN_SIZE)

    fn = lambda x: tsum(mul(rnn_step(kind, model.params, h_prev, c_prev, x)[0], weights))
    rel_err, analytic, _ = check_gradient(fn, rng.uniform(-1, 1, size=ENCODER_DIM))
    assert analytic.shape == (ENCODER_DIM,)
    assert rel_err < 1e-3


# =============================================================================
# Unit tests for training and evaluation
# =============================================================================
def test_train(tiny_models, tiny_videos):
    """ Unit tests for threat model training """
    model = tiny_models['VanillaRNN']
    labels = np.array([0,1,2,3])

    trained, accuracy = train(model, tiny_videos, labels, epochs=3, lr=1e-2, batch_size=2,
                              seed=5, verbose=False)
    trained2, _ = train(model, tiny_videos, labels, epochs=3, lr=1e-2, batch_size=2,
                        seed=5, verbose=False)

    # Same seed -> bit-identical parameters; input model untouched
    for name in model.params:
        assert np.array_equal(trained.params[name], trained2.params[name])
        assert np.array_equal(trained.params[name].astype(np.float32), trained.params[name])
    assert not np.array_equal(trained.params['W_cls'], model.params['W_cls'])
    assert np.array_equal(model.params['W_cls'], tiny_models['VanillaRNN'].params['W_cls'])

    assert set(accuracy.keys()) == {'train','test','direction_train','direction_test'}
    assert 0 <= accuracy['train'] <= 1
    assert np.isnan(accuracy['test'])
    assert accuracy['train'] == evaluate(trained, tiny_videos, labels)[0]

    _, accuracy = train(model, tiny_videos, labels, test_videos=tiny_videos[:2],
                        test_labels=labels[:2], epochs=1, seed=5, verbose=False)
    assert 0 <= accuracy['test'] <= 1


def test_train_zero_epochs(tiny_models, tiny_videos):
    """ Zero epochs returns an unchanged copy of the model """
    model = tiny_models['GRU']
    trained, _ = train(model, tiny_videos, [0,1,2,3], epochs=0, verbose=False)
    assert trained is not model
    for name in model.params:
        assert np.array_equal(trained.params[name], model.params[name])


@pytest.mark.parametrize('kind', ['VanillaRNN','AvgPool'])
def test_train_separable(kind):
    """ Single-frame clips whose class is their mean intensity are learned to >= 99% """
    rng = np.random.default_rng(6)
    labels = np.repeat([0,1], 20)
    videos = np.where(labels == 0, 0.2, 0.8)[:,None,None,None,None] \
             + rng.normal(0, 0.05, size=(40,1,*FRAME_SHAPE))
    model = init_model(kind, FRAME_SHAPE, 2, hidden_size=HIDDEN_SIZE, encoder_dim=ENCODER_DIM,
                       seed=3)
    _, accuracy = train(model, np.clip(videos, 0, 1), labels, epochs=60, lr=2e-2,
                        batch_size=8, seed=4, verbose=False)
    assert accuracy['train'] >= 0.99


def test_train_errors(tiny_models, tiny_videos):
    """ Training errors: empty set, label count mismatch, divergence """
    model = tiny_models['AvgPool']
    with pytest.raises(ValueError):
        train(model, tiny_videos[:0], [], epochs=1, verbose=False)
    with pytest.raises(ShapeError):
        train(model, tiny_videos, [0,1], epochs=1, verbose=False)

    broken = model.copy()
    broken.params['W_cls'][0,0] = np.nan
    with pytest.raises(DivergenceError):
        train(broken, tiny_videos, [0,1,2,3], epochs=1, verbose=False)


def test_evaluate(tiny_models, tiny_videos):
    """ A model scores 100% on its own predicted labels """
    model = tiny_models['LSTM']
    labels = model_labels(model, tiny_videos)
    accuracy, dir_accuracy = evaluate(model, tiny_videos, labels, batch_size=3)
    assert accuracy == 1.0
    assert dir_accuracy == 1.0


@pytest.mark.parametrize('predicted, labels, result',
                         [([0,1,2,3], [0,1,2,3], 1.0),
                          ([1,0,3,2], [0,1,2,3], 0.0),
                          ([0,0,2,2], [0,1,2,3], 0.5),
                          ([4,5,6,7], [0,1,2,3], np.nan)])
def test_direction_accuracy(predicted, labels, result):
    """ Direction accuracy counts only predictions within the label's direction pair """
    value = direction_accuracy(predicted, labels)
    if np.isnan(result):
        assert np.isnan(value)
    else:
        assert value == result


# =============================================================================
# Unit tests for model files
# =============================================================================
@pytest.mark.parametrize('kind', HEAD_KINDS)
def test_model_file_round_trip(tiny_models, tmp_path, kind):
    """ Saved models load back bit-exactly """
    model = tiny_models[kind].copy()
    model.dataset_id = 'abc123'
    filename = os.path.join(str(tmp_path), kind + '.model')
    save_model(filename, model)
    loaded = load_model(filename)

    assert loaded.head_kind == model.head_kind
    assert tuple(loaded.frame_shape) == tuple(model.frame_shape)
    assert (loaded.num_classes, loaded.hidden_size, loaded.encoder_dim) == \
           (model.num_classes, model.hidden_size, model.encoder_dim)
    assert loaded.dataset_id == 'abc123'
    assert loaded.param_names == model.param_names
    for name in model.params:
        assert np.array_equal(loaded.params[name], model.params[name])


def test_model_file_errors(tiny_models, tmp_path):
    """ Corrupt model files raise FormatError / UnsupportedVersionError """
    filename = os.path.join(str(tmp_path), 'good.model')
    save_model(filename, tiny_models['GRU'])
    with open(filename, 'rb') as f:
        buf = f.read()

    def _check(contents, error):
        bad_file = os.path.join(str(tmp_path), 'bad.model')
        with open(bad_file, 'wb') as f:
            f.write(contents)
        with pytest.raises(error):
            load_model(bad_file)

    _check(b'XTEN' + buf[4:], FormatError)                      # Bad magic
    _check(buf[:4] + bytes([2]) + buf[5:], UnsupportedVersionError)
    _check(buf[:6], FormatError)                                # Truncated preamble
    _check(buf[:-3], FormatError)                               # Truncated weights
    _check(buf + b'\x00', FormatError)                          # Trailing bytes
