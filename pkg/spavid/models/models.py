# -*- coding: utf-8 -*-
"""
Threat models: per-frame encoder, temporal head, per-frame classifier

Overview
--------
A :class:`ThreatModel` maps a (T,W,H,C) video to T per-frame class-probability vectors:

1. encoder: each flattened frame (W*H*C) -> affine -> tanh -> encoded frame (d)
2. temporal head: VanillaRNN, LSTM, GRU, or AvgPool (stateless per-frame affine+tanh), giving
   one hidden vector (h) per frame
3. classifier: the same affine h -> num_classes map at every time step, then softmax

The video-level probability vector is the mean of the per-frame probability vectors, so frame
and video predictions are always consistent. Labels are argmaxes, ties broken toward the lower
class index.

All functions are batched: a list/array of N equal-shape clips is flattened to (N,T,W*H*C) and
run through a single computation, so every clip's result is identical to running it alone.

Function list
-------------
- ThreatModel :     Container for model architecture and parameters
- Prediction :      Frame-level and video-level probabilities and labels for one clip
- init_model :      Create a randomly initialized threat model
- forward :         Run a single clip through a model -> Prediction
- forward_batch :   Run a batch of clips -> (frame_probs, video_probs) Tensors (differentiable)
- predict :         Run a batch of clips -> list of Predictions (no gradient tracking)
- predict_labels :  Video-level labels for a batch of clips

Function reference
------------------
"""
from collections import OrderedDict
from dataclasses import dataclass, field
import numpy as np

from spavid.errors import ShapeError
from spavid.helpers import _to_float32_grid
from spavid.utils import make_rng
from spavid.tensor import Tensor, add, matmul, tanh, softmax, reshape, stack, tmean, getitem
from spavid.models.cells import HEAD_KINDS, head_kind_name, n_gates, _cell


# =============================================================================
# Model types
# =============================================================================
@dataclass
class ThreatModel:
    """
    Per-frame encoder + temporal head + per-frame classifier

    Attributes
    ----------
    head_kind : {'VanillaRNN','LSTM','GRU','AvgPool'}
        Temporal head type

    frame_shape : tuple of int, (W,H,C)
        Expected frame shape

    num_classes : int
        Number of output classes

    hidden_size, encoder_dim : int
        Size of head hidden state (h) and encoded frame (d)

    params : OrderedDict {name : ndarray}
        Parameters in fixed order (see :func:`param_shapes`). Treated as immutable.

    dataset_id : str
        Identifier of the dataset the model was trained on ('' if untrained)
    """
    head_kind: str
    frame_shape: tuple
    num_classes: int
    hidden_size: int
    encoder_dim: int
    params: OrderedDict = field(repr=False)
    dataset_id: str = ''

    @property
    def n_features(self):
        """ Flattened frame size W*H*C """
        return int(np.prod(self.frame_shape))

    @property
    def param_names(self):
        return list(self.params.keys())

    def copy(self):
        """ Deep copy of model (parameters copied) """
        params = OrderedDict((name, value.copy()) for name,value in self.params.items())
        return ThreatModel(self.head_kind, tuple(self.frame_shape), self.num_classes,
                           self.hidden_size, self.encoder_dim, params, self.dataset_id)

    def all_finite(self):
        """ True if every parameter is finite """
        return all(np.all(np.isfinite(value)) for value in self.params.values())


@dataclass
class Prediction:
    """
    Frame-level and video-level predictions for one clip

    Attributes
    ----------
    frame_probs : ndarray, shape=(T,num_classes)
    video_probs : ndarray, shape=(num_classes,)
    frame_labels : ndarray of int, shape=(T,)
    video_label : int
    video_probs_tensor : Tensor or None
        Differentiable video probabilities, set when the input video was a Tensor
    """
    frame_probs: np.ndarray
    video_probs: np.ndarray
    frame_labels: np.ndarray
    video_label: int
    video_probs_tensor: Tensor = field(default=None, repr=False, compare=False)


def param_shapes(head_kind, n_features, num_classes, hidden_size=64, encoder_dim=64):
    """
    Parameter names and shapes of a threat model, in fixed (serialization) order

    Returns
    -------
    shapes : OrderedDict {name : shape}
    """
    head_kind = head_kind_name(head_kind)
    n_gate_units = n_gates(head_kind)*hidden_size
    shapes = OrderedDict()
    shapes['W_enc'] = (n_features, encoder_dim)
    shapes['b_enc'] = (1, encoder_dim)
    shapes['W_x'] = (encoder_dim, n_gate_units)
    if head_kind != 'AvgPool': shapes['W_h'] = (hidden_size, n_gate_units)
    shapes['b_h'] = (1, n_gate_units)
    shapes['W_cls'] = (hidden_size, num_classes)
    shapes['b_cls'] = (1, num_classes)
    return shapes


def init_model(head_kind, frame_shape, num_classes, hidden_size=64, encoder_dim=64,
               seed=None, dataset_id=''):
    """
    Create a threat model with seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights

    Biases use the fan-in of the weight matrix they follow. All values are rounded to
    float32-representable numbers so saved models round-trip bit-exactly.

    Parameters
    ----------
    head_kind : {'VanillaRNN','LSTM','GRU','AvgPool'}
        Temporal head type. Case-insensitive; 'pool' and 'rnn' are also accepted.

    frame_shape : tuple of int, (W,H,C)
        Frame shape of input videos

    num_classes : int
        Number of output classes

    hidden_size : int, default: 64
        Hidden state size

    encoder_dim : int, default: 64
        Encoded frame size

    seed : int, default: None
        Random seed for initialization

    dataset_id : str, default: ''
        Identifier of the dataset the model will be trained on

    Returns
    -------
    model : ThreatModel
    """
    head_kind = head_kind_name(head_kind)
    frame_shape = tuple(int(n) for n in frame_shape)
    assert len(frame_shape) == 3, \
        ValueError("frame_shape must be (W,H,C), got %s" % (frame_shape,))
    assert num_classes >= 2, ValueError("num_classes must be >= 2, got %d" % num_classes)

    n_features = int(np.prod(frame_shape))
    shapes = param_shapes(head_kind, n_features, num_classes, hidden_size, encoder_dim)
    fan_in = {'W_enc': n_features, 'b_enc': n_features, 'W_x': encoder_dim, 'W_h': hidden_size,
              'b_h': encoder_dim, 'W_cls': hidden_size, 'b_cls': hidden_size}

    rng = make_rng(seed)
    params = OrderedDict()
    for name,shape in shapes.items():
        bound = 1.0/np.sqrt(fan_in[name])
        params[name] = _to_float32_grid(rng.uniform(-bound, bound, size=shape))

    return ThreatModel(head_kind, frame_shape, int(num_classes), int(hidden_size),
                       int(encoder_dim), params, dataset_id)


# =============================================================================
# Forward passes
# =============================================================================
def forward_batch(model, videos, params=None):
    """
    Run a batch of clips through a threat model, tracking gradients where inputs require them

    Parameters
    ----------
    model : ThreatModel
        Model to run

    videos : Tensor, shape=(N,T,W*H*C) or array-like, shape=(N,T,W,H,C) or (N,T,W*H*C)
        Batch of equal-length clips. If a Tensor requiring grad, outputs are differentiable
        wrt it.

    params : dict {name : Tensor}, default: model.params
        Parameter values to use instead of the model's (used by the trainer to track
        parameter gradients)

    Returns
    -------
    frame_probs : Tensor, shape=(N,T,num_classes)
        Per-frame class probabilities

    video_probs : Tensor, shape=(N,num_classes)
        Mean of per-frame probabilities
    """
    params = model.params if params is None else params
    params = {name: value if isinstance(value,Tensor) else Tensor(value)
              for name,value in params.items()}
    if isinstance(videos,Tensor):
        x = videos
    else:
        videos = np.asarray(videos, dtype=float)
        if (videos.ndim == 5) and (tuple(videos.shape[2:]) == tuple(model.frame_shape)):
            videos = videos.reshape(videos.shape[0], videos.shape[1], -1)
        x = Tensor(videos)

    if (x.ndim != 3) or (x.shape[2] != model.n_features):
        raise ShapeError("Videos must be (N,T,W,H,C) or (N,T,W*H*C) matching model frame shape %s"
                         % (tuple(model.frame_shape),), x.shape)
    n_clips, n_frames = x.shape[0], x.shape[1]
    if n_frames < 1:
        raise ShapeError("Videos must contain at least one frame", x.shape)

    # Encoder and input projections for all frames at once
    ones = np.ones((n_clips*n_frames,1))
    frames = reshape(x, (n_clips*n_frames, model.n_features))
    encoded = tanh(add(matmul(frames, params['W_enc']), matmul(ones, params['b_enc'])))
    xw = add(matmul(encoded, params['W_x']), matmul(ones, params['b_h']))
    xw = reshape(xw, (n_clips, n_frames, xw.shape[1]))

    # Temporal head
    h = Tensor(np.zeros((n_clips, model.hidden_size)))
    c = None
    hidden = []
    for t in range(n_frames):
        xw_t = getitem(xw, (slice(None), t, slice(None)))
        h, c = _cell(model.head_kind, params.get('W_h'), h, c, xw_t)
        hidden.append(h)
    hidden = reshape(stack(hidden, axis=1), (n_clips*n_frames, model.hidden_size))

    # Per-frame classifier, video probs = mean over frames
    logits = add(matmul(hidden, params['W_cls']), matmul(ones, params['b_cls']))
    frame_probs = reshape(softmax(logits), (n_clips, n_frames, model.num_classes))
    video_probs = tmean(frame_probs, axis=1)

    return frame_probs, video_probs


def forward(model, video):
    """
    Run a single clip through a threat model

    Parameters
    ----------
    model : ThreatModel
        Model to run

    video : Tensor or array-like, shape=(T,W,H,C)
        Clip to classify. If a Tensor requiring grad, `video_probs_tensor` of the
        output is differentiable wrt it.

    Returns
    -------
    pred : Prediction
    """
    x = video if isinstance(video,Tensor) else Tensor(video)
    if x.ndim != 4:
        raise ShapeError("Video must be rank 4 (T,W,H,C)", x.shape)
    if tuple(x.shape[1:]) != tuple(model.frame_shape):
        raise ShapeError("Video frame shape does not match model", x.shape[1:], model.frame_shape)

    x = reshape(x, (1, x.shape[0], model.n_features))
    frame_probs, video_probs = forward_batch(model, x)
    pred = _to_prediction(frame_probs.data[0], video_probs.data[0])
    if video_probs.requires_grad: pred.video_probs_tensor = getitem(video_probs, 0)
    return pred


def predict(model, videos):
    """
    Predictions for each of a batch of clips, without gradient tracking

    Parameters
    ----------
    model : ThreatModel
    videos : array-like, shape=(N,T,W,H,C)

    Returns
    -------
    preds : list of Prediction, length N
    """
    videos = np.asarray(videos, dtype=float)
    if videos.ndim == 4: videos = videos[np.newaxis]
    frame_probs, video_probs = forward_batch(model, videos)
    return [_to_prediction(frame_probs.data[i], video_probs.data[i])
            for i in range(video_probs.shape[0])]


def predict_labels(model, videos):
    """
    Video-level and frame-level labels for a batch of clips

    Returns
    -------
    video_labels : ndarray of int, shape=(N,)
    frame_labels : ndarray of int, shape=(N,T)
    """
    videos = np.asarray(videos, dtype=float)
    if videos.ndim == 4: videos = videos[np.newaxis]
    frame_probs, video_probs = forward_batch(model, videos)
    return video_probs.data.argmax(axis=-1), frame_probs.data.argmax(axis=-1)


def _to_prediction(frame_probs, video_probs):
    """ Package probability arrays as a Prediction. np.argmax breaks ties toward lower index """
    return Prediction(frame_probs=frame_probs.copy(), video_probs=video_probs.copy(),
                      frame_labels=frame_probs.argmax(axis=-1),
                      video_label=int(video_probs.argmax()))
