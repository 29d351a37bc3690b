# -*- coding: utf-8 -*-
"""
Fitting threat models to labeled video datasets

Function list
-------------
- train :               Fit model parameters by minibatch Adam on video-level cross-entropy
- evaluate :            Accuracy and direction accuracy of a model on a labeled set
- direction_accuracy :  Accuracy on motion direction among clips with correct shape and axis

Function reference
------------------
"""
import logging
import numpy as np

from spavid.errors import DivergenceError, ShapeError
from spavid.helpers import _one_hot, _to_float32_grid
from spavid.utils import make_rng
from spavid.tensor import Tensor, mul, tsum, tmean, log, clip, neg
from spavid.models.models import forward_batch, predict_labels
from spavid.attack.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def train(model, videos, labels, test_videos=None, test_labels=None, epochs=40, lr=5e-3,
          batch_size=16, clip_norm=5.0, seed=None, verbose=True):
    """
    Fit threat model parameters by minibatch Adam on video-level cross-entropy -log(v_y)

    Clips are shuffled each epoch with a seeded generator, so results are fully determined by
    `seed`. Gradients are rescaled to global norm <= `clip_norm` before each update. After
    training, parameters are rounded to float32-representable values.

    Parameters
    ----------
    model : ThreatModel
        Initial model. Not altered.

    videos : ndarray, shape=(N,T,W,H,C)
        Training clips

    labels : array-like of int, shape=(N,)
        Training labels, each < model.num_classes

    test_videos, test_labels : optional
        Held-out clips/labels for reporting test accuracy

    epochs : int, default: 40
        Number of passes over the training set. 0 returns an unchanged copy of the model.

    lr : float, default: 5e-3
        Adam learning rate

    batch_size : int, default: 16
        Clips per minibatch

    clip_norm : float, default: 5.0
        Maximum global gradient norm

    seed : int, default: None
        Random seed for shuffling

    verbose : bool, default: True
        If True, logs per-epoch loss at INFO level; otherwise at DEBUG level

    Returns
    -------
    model : ThreatModel
        Trained model (new object)

    accuracy : dict
        {'train', 'test', 'direction_train', 'direction_test'} accuracies
        ('test' entries are NaN if no test set given)

    Raises
    ------
    DivergenceError
        If the training loss becomes NaN/Inf
    """
    videos = np.asarray(videos, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if len(videos) == 0:
        raise ValueError("Training set is empty")
    if len(videos) != len(labels):
        raise ShapeError("Number of videos and labels differ", videos.shape[:1], labels.shape)
    onehot = _one_hot(labels, model.num_classes)
    log_fn = logger.info if verbose else logger.debug

    model = model.copy()
    rng = make_rng(seed)
    states = {name: AdamState(lr=lr) for name in model.params}
    n_clips = len(videos)

    for epoch in range(epochs):
        order = rng.permutation(n_clips)
        epoch_loss = 0.0
        for start in range(0, n_clips, batch_size):
            batch = order[start:start+batch_size]
            params = {name: Tensor(value, requires_grad=True)
                      for name,value in model.params.items()}

            _, video_probs = forward_batch(model, videos[batch], params=params)
            target_prob = tsum(mul(video_probs, onehot[batch]), axis=1)
            loss = neg(tmean(log(clip(target_prob, PROB_FLOOR, 1.0))))

            if not np.isfinite(loss.item()):
                raise DivergenceError("Training loss became non-finite (%s) at epoch %d, batch "
                                      "starting at clip %d. Try a smaller learning rate."
                                      % (loss.item(), epoch, start))
            loss.backward()
            epoch_loss += loss.item()*len(batch)

            grads = {name: params[name].grad for name in model.params}
            grad_norm = np.sqrt(sum((g**2).sum() for g in grads.values()))
            scale = min(1.0, clip_norm/grad_norm) if grad_norm > 0 else 1.0
            for name in model.params:
                model.params[name], _ = adam_step(states[name], scale*grads[name],
                                                  model.params[name])

        log_fn("%s epoch %d/%d: loss = %.4f", model.head_kind, epoch+1, epochs,
               epoch_loss/n_clips)

    for name in model.params:
        model.params[name] = _to_float32_grid(model.params[name])
    if not model.all_finite():
        raise DivergenceError("Training produced non-finite parameters")

    accuracy = {}
    accuracy['train'], accuracy['direction_train'] = evaluate(model, videos, labels)
    if test_videos is not None:
        accuracy['test'], accuracy['direction_test'] = evaluate(model, test_videos, test_labels)
    else:
        accuracy['test'], accuracy['direction_test'] = np.nan, np.nan
    log_fn("%s accuracy: %s", model.head_kind, accuracy)

    return model, accuracy


def evaluate(model, videos, labels, batch_size=64):
    """
    Video-level accuracy and direction accuracy of a model on a labeled set

    Returns
    -------
    accuracy : float
        Fraction of clips whose predicted video label equals the true label

    dir_accuracy : float
        See :func:`direction_accuracy`
    """
    videos = np.asarray(videos, dtype=float)
    labels = np.asarray(labels, dtype=int)
    predicted = np.concatenate([predict_labels(model, videos[start:start+batch_size])[0]
                                for start in range(0, len(videos), batch_size)])
    return float(np.mean(predicted == labels)), direction_accuracy(predicted, labels)


def direction_accuracy(predicted, labels):
    """
    Accuracy on motion direction among clips whose object shape and motion axis are correct

    Class indexes are shape*4 + direction with direction pairs (right,left) and (down,up), so
    classes 2k and 2k+1 differ only in direction. Chance level is 0.5.

    Returns
    -------
    accuracy : float
        Fraction of same-pair predictions with the correct direction (NaN if none)
    """
    predicted = np.asarray(predicted, dtype=int)
    labels = np.asarray(labels, dtype=int)
    same_pair = (predicted // 2) == (labels // 2)
    if not same_pair.any(): return np.nan
    return float(np.mean(predicted[same_pair] == labels[same_pair]))
