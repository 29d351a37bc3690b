# -*- coding: utf-8 -*-
"""
Sparse adversarial perturbations for video classifiers

Overview
--------
Perturbations are optimized by Adam on the objective defined in :mod:`spavid.attack.objectives`:
a weighted l2 or l2,1 norm of the (masked) perturbation, minus (non-targeted) or plus
(targeted) the surrogate loss of the model's video-level prediction.

After every step the perturbation is re-masked and projected onto a box. For a per-clip
perturbation this is the box where the adversarial clip X + M.E stays in [0,1]. A perturbation
shared by several clips is kept in the union of the clips' boxes, and each clip's X_i + M.E is
clamped into [0,1] before it reaches the model. With one clip the two boxes coincide, so a
one-clip universal attack follows exactly the same trajectory as a single-clip attack.

The perturbation starts at `init_scale` in every unmasked entry, so runs are fully
deterministic. The starting value is projected like every later iterate, so with `iters=0` a
per-clip perturbation is init_scale everywhere except at pixels above 1 - init_scale, where it
is 1 - X.

Attack modes
^^^^^^^^^^^^
- single :      one clip, non-targeted
- masked :      frames with mask bit 0 carry no perturbation
- targeted :    drive the video label to `target_label` (honors a mask if given)
- universal :   one perturbation shared by N clips, loss averaged over clips

Function list
-------------
- attack_single :       Non-targeted attack on one clip
- attack_masked :       Attack restricted to mask-selected frames
- attack_targeted :     Attack driving prediction to a target class
- attack_universal :    One perturbation fooling many clips
- attack_each :         Independent per-clip attacks of any mode, run as one batch
- correctly_classified : Which clips a model labels correctly

Function reference
------------------
"""
import time
import logging
import numpy as np

from spavid.errors import AttackError, ShapeError
from spavid.helpers import _check_video_array, _check_same_shapes
from spavid.tensor import Tensor
from spavid.models.models import predict, predict_labels
from spavid.metrics import metric_set, fooling_rate
from spavid.attack.config import AttackConfig, TemporalMask
from spavid.attack.objectives import objective
from spavid.attack.optim import AdamState, adam_step, clip_to_valid, effective_perturbation
from spavid.attack.report import Perturbation, AttackReport

logger = logging.getLogger(__name__)


# =============================================================================
# Attack functions
# =============================================================================
def attack_single(model, video, label, config=None):
    """
    Non-targeted attack on a single, correctly-classified clip

    Minimizes lam*||E||_p - log(1 - p_y(X + E)) over E.

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    video : array-like, shape=(T,W,H,C)
        Clean clip X, pixel values in [0,1]

    label : int
        True label y. Model must currently predict it.

    config : AttackConfig, default: AttackConfig() (mode 'single')
        Attack settings

    Returns
    -------
    perturbation : Perturbation
        Effective perturbation (clipped X_adv - X)

    report : AttackReport

    Raises
    ------
    AttackError
        If the clip is already misclassified, or config mode is not 'single'
    """
    config = _check_config(config, 'single')
    video = _check_video_array(video)
    perturbations, reports = attack_each(model, video[np.newaxis], [label], config)
    return perturbations[0], reports[0]


def attack_masked(model, videos, labels, config):
    """
    Attack restricted to the frames selected by a temporal mask

    Minimizes lam*||M.E||_p - l(1_y, J(X + M.E)). Masked-out frames of the returned
    perturbation are exactly zero.

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    videos : array-like, shape=(T,W,H,C) or (N,T,W,H,C)
        Clean clip, or several clips sharing one perturbation (loss averaged over clips)

    labels : int or array-like of int, shape=(N,)
        True label(s). A single clip must be correctly classified.

    config : AttackConfig
        Attack settings, with mode 'masked' and `mask` of length T

    Returns
    -------
    perturbation : Perturbation
    report : AttackReport

    Raises
    ------
    AttackError
        All-zero mask, mask length != T, or misclassified single clip
    """
    config = _check_config(config, 'masked')
    videos = np.asarray(videos, dtype=float)
    _check_mask(config.mask, videos.shape[-4])

    if videos.ndim == 4:
        perturbations, reports = attack_each(model, videos[np.newaxis], [labels], config)
        return perturbations[0], reports[0]
    return _attack_shared(model, videos, labels, config)


def attack_targeted(model, videos, labels, target, config):
    """
    Attack driving the video-level prediction to a chosen target class

    Minimizes lam*||M.E||_p + l(1_y*, J(X + M.E)), ie pushes p_y* up. Success means the
    adversarial video label equals the target.

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    videos : array-like, shape=(T,W,H,C) or (N,T,W,H,C)
        Clean clip, or several clips sharing one perturbation (loss averaged over clips)

    labels : int or array-like of int, shape=(N,)
        True label(s). None may equal `target`.

    target : int
        Target class y*

    config : AttackConfig
        Attack settings, mode 'targeted'. `target_label` is set to `target`.

    Returns
    -------
    perturbation : Perturbation
    report : AttackReport

    Raises
    ------
    AttackError
        If target equals the true label of any clip
    """
    config = _check_config(config.replace(target_label=int(target)), 'targeted')
    videos = np.asarray(videos, dtype=float)
    if config.mask is not None: _check_mask(config.mask, videos.shape[-4])

    if videos.ndim == 4:
        perturbations, reports = attack_each(model, videos[np.newaxis], [labels], config)
        return perturbations[0], reports[0]
    return _attack_shared(model, videos, labels, config)


def attack_universal(model, videos, labels, config=None, heldout_videos=None,
                     heldout_labels=None):
    """
    One perturbation fooling many clips

    Minimizes lam*||M.E||_p - (1/N) sum_i l(1_y_i, J(X_i + M.E)) over a single E shared by
    all N training clips. Clips need not be correctly classified; fooling rates count every
    clip whose adversarial label differs from its true label.

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    videos : array-like, shape=(N,T,W,H,C)
        Training clips; all must share the same shape

    labels : array-like of int, shape=(N,)
        True labels

    config : AttackConfig, default: AttackConfig(mode='universal')
        Attack settings, mode 'universal' (a mask is honored if given)

    heldout_videos, heldout_labels : optional
        Held-out clips/labels on which to also evaluate the perturbation
        (clipped to valid pixel range per clip)

    Returns
    -------
    perturbation : Perturbation
        Shared perturbation E. Applying it to a clip means clip_to_valid(X_i + E).

    report : AttackReport
        `fooling_rate` is the train-set rate; `heldout_fooling_rate` the held-out rate
        (NaN if no held-out set given)

    Raises
    ------
    AttackError
        If clips have heterogeneous shapes
    """
    if config is None: config = AttackConfig(mode='universal')
    config = _check_config(config, 'universal')
    try:
        _check_same_shapes(list(videos), name='universal attack videos')
    except ShapeError as err:
        raise AttackError("Universal attack requires clips of one shape: %s" % err)
    videos = np.asarray(videos, dtype=float)
    if config.mask is not None: _check_mask(config.mask, videos.shape[1])

    perturbation, report = _attack_shared(model, videos, labels, config)

    if heldout_videos is not None:
        heldout_videos = np.asarray(heldout_videos, dtype=float)
        heldout_labels = np.asarray(heldout_labels, dtype=int)
        if len(heldout_videos) == 0:
            raise AttackError("Held-out set is empty")
        if heldout_videos.shape[1:] != videos.shape[1:]:
            raise AttackError("Held-out clips shape %s does not match training clips %s"
                              % (heldout_videos.shape[1:], videos.shape[1:]))
        adversarial = clip_to_valid(heldout_videos + perturbation.data, config.clip_pixels)
        predicted, _ = predict_labels(model, adversarial)
        report.heldout_fooling_rate = fooling_rate(predicted != heldout_labels)

    return perturbation, report


def attack_each(model, videos, labels, config, check_correct=True, clip_ids=None):
    """
    Independent attacks on each of a batch of clips, optimized together in one computation

    The batch objective is the sum of per-clip objectives, so each clip's perturbation follows
    its own attack trajectory. Works for modes 'single', 'masked', and 'targeted'.

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    videos : array-like, shape=(N,T,W,H,C)
        Clean clips

    labels : array-like of int, shape=(N,)
        True labels

    config : AttackConfig
        Attack settings

    check_correct : bool, default: True
        If True, raise AttackError if any clip is misclassified before the attack.
        Set False to attack sub-clips whose own prediction is irrelevant (eg splicing).

    clip_ids : list of str, optional
        Identifiers recorded in each report

    Returns
    -------
    perturbations : list of Perturbation, length N
        Effective (clipped) perturbations
    reports : list of AttackReport, length N
        `seconds_per_iteration` is the time per iteration of the whole batch
    """
    config = config.validate()
    if config.mode == 'universal':
        raise AttackError("attack_each runs independent attacks; use attack_universal")
    videos = np.asarray(videos, dtype=float)
    if videos.ndim != 5:
        raise ShapeError("attack_each requires a batch of clips (N,T,W,H,C)", videos.shape)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    if config.mask is not None: _check_mask(config.mask, videos.shape[1])
    _check_labels(model, videos, labels, config, check_correct)

    n_clips = videos.shape[0]
    flat_shape = (n_clips, videos.shape[1], int(np.prod(videos.shape[2:])))
    lower, upper = -videos.reshape(flat_shape), 1.0 - videos.reshape(flat_shape)

    E, info = _optimize(model, videos, labels, config, flat_shape, lower, upper)

    perturbation = effective_perturbation(videos, E.reshape(videos.shape), config.clip_pixels)
    before = predict(model, videos)
    after = predict(model, videos + perturbation)

    perturbations, reports = [], []
    for i in range(n_clips):
        target_probs = None
        if config.mode == 'targeted':
            target_probs = (before[i].video_probs[config.target_label],
                            after[i].video_probs[config.target_label])
        success = _is_success(after[i].video_label, labels[i], config)
        report = _make_report(config, perturbation[i], [success], info,
                              before[i].frame_labels.tolist(), after[i].frame_labels.tolist(),
                              before[i].video_label, after[i].video_label, target_probs)
        if clip_ids is not None: report.clip_ids = [clip_ids[i]]
        perturbations.append(Perturbation(perturbation[i]))
        reports.append(report)

    return perturbations, reports


def correctly_classified(model, videos, labels, batch_size=64):
    """
    Which clips a model labels correctly

    Returns
    -------
    correct : ndarray of bool, shape=(N,)
    """
    videos = np.asarray(videos, dtype=float)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    predicted = np.concatenate([predict_labels(model, videos[start:start+batch_size])[0]
                                for start in range(0, len(videos), batch_size)])
    return predicted == labels


# =============================================================================
# Private helper functions
# =============================================================================
def _attack_shared(model, videos, labels, config):
    """
    Optimize one perturbation shared by all clips, loss averaged over clips

    Returns the shared perturbation E. Its report is computed on each clip's effective
    perturbation clip_to_valid(X_i + E) - X_i.
    """
    if videos.ndim != 5:
        raise ShapeError("Shared-perturbation attack requires (N,T,W,H,C) clips", videos.shape)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    _check_labels(model, videos, labels, config, check_correct=False)

    n_frames = videos.shape[1]
    flat = videos.reshape(videos.shape[0], n_frames, -1)
    flat_shape = flat.shape[1:]
    # Beyond this box every clip's pixel is clamped
    lower, upper = -flat.max(axis=0), 1.0 - flat.min(axis=0)

    E, info = _optimize(model, videos, labels, config, flat_shape, lower, upper)
    E = E.reshape(videos.shape[1:])

    perturbation = effective_perturbation(videos, E[np.newaxis], config.clip_pixels)
    before = predict(model, videos)
    after = predict(model, videos + perturbation)

    successes = [_is_success(pred.video_label, label, config) for pred,label in zip(after,labels)]
    target_probs = None
    if config.mode == 'targeted':
        target_probs = (np.mean([pred.video_probs[config.target_label] for pred in before]),
                        np.mean([pred.video_probs[config.target_label] for pred in after]))

    report = _make_report(config, perturbation, successes, info,
                          [pred.frame_labels.tolist() for pred in before],
                          [pred.frame_labels.tolist() for pred in after],
                          [pred.video_label for pred in before],
                          [pred.video_label for pred in after], target_probs)

    return Perturbation(E), report


def _optimize(model, videos, labels, config, flat_shape, lower, upper):
    """
    Run Adam on the attack objective

    Parameters
    ----------
    flat_shape : tuple
        Shape of optimized perturbation: (N,T,F) for independent clips, (T,F) for shared
    lower, upper : ndarray, shape=flat_shape
        Projection box for the perturbation

    Returns
    -------
    E : ndarray, shape=flat_shape
        Final (masked, projected) perturbation
    info : dict
        'objective_initial', 'objective_final', 'seconds_per_iteration', 'iterations'
    """
    shared = len(flat_shape) == 2
    keep = None
    if config.mask is not None:
        keep = config.mask.as_array(flat_shape, time_axis=len(flat_shape)-2) != 0

    def project(E):
        if keep is not None: E = np.where(keep, E, 0.0)
        if config.clip_pixels: E = np.clip(E, lower, upper)
        return E

    def evaluate(E):
        return objective(model, videos, labels, E, config, shared=shared)

    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    E = project(np.full(flat_shape, float(config.init_scale)))
    objective_initial = evaluate(E).item()

    t_start = time.perf_counter()
    for iteration in range(config.iters):
        E_tensor = Tensor(E, requires_grad=True)
        value = evaluate(E_tensor)
        value.backward()
        E, _ = adam_step(state, E_tensor.grad, E)
        E = project(E)
        if (iteration+1) % 100 == 0:
            logger.debug("%s attack iteration %d/%d: objective = %.6g",
                         config.mode, iteration+1, config.iters, value.item())
    elapsed = time.perf_counter() - t_start

    info = {'objective_initial': objective_initial,
            'objective_final': evaluate(E).item(),
            'seconds_per_iteration': elapsed/config.iters if config.iters > 0 else 0.0,
            'iterations': config.iters}
    return E, info


def _make_report(config, perturbation, successes, info, frame_labels_before,
                 frame_labels_after, video_label_before, video_label_after, target_probs):
    """ Package metrics, labels, and optimization info as an AttackReport """
    metrics = metric_set(perturbation, successes, config.pixel_scale, config.zero_threshold)
    report = AttackReport(success=bool(all(successes)),
                          fooling_rate=metrics.fooling_rate,
                          perceptibility_map=metrics.perceptibility,
                          sparsity=metrics.sparsity,
                          per_frame_map=metrics.per_frame_map.tolist(),
                          frame_labels_before=frame_labels_before,
                          frame_labels_after=frame_labels_after,
                          video_label_before=video_label_before,
                          video_label_after=video_label_after,
                          seconds_per_iteration=info['seconds_per_iteration'],
                          mode=config.mode, norm=config.norm, lam=config.lam,
                          iterations=info['iterations'],
                          objective_initial=info['objective_initial'],
                          objective_final=info['objective_final'],
                          target_label=config.target_label,
                          successes=[bool(s) for s in successes],
                          n_clips=len(successes))
    if target_probs is not None:
        report.target_prob_initial, report.target_prob_final = map(float, target_probs)
    return report


def _is_success(label_after, label_true, config):
    """ Targeted: label == target. Otherwise: label != true label """
    if config.mode == 'targeted': return int(label_after) == int(config.target_label)
    return int(label_after) != int(label_true)


def _check_config(config, mode):
    """ Validate config and check it is for the given attack mode """
    if config is None: config = AttackConfig(mode=mode)
    config = config.validate()
    if config.mode != mode:
        raise AttackError("Attack config has mode '%s', expected '%s'" % (config.mode, mode))
    return config


def _check_mask(mask, n_frames):
    """ Mask must match clip length and leave at least one frame to perturb """
    if mask is None:
        raise AttackError("Masked attack requires a temporal mask")
    if not isinstance(mask, TemporalMask): mask = TemporalMask.from_bits(mask)
    if mask.T != n_frames:
        raise AttackError("Mask length %d does not match clip length %d" % (mask.T, n_frames))
    if mask.K == mask.T:
        raise AttackError("Mask excludes every frame (K = T = %d); nothing to optimize" % mask.T)


def _check_labels(model, videos, labels, config, check_correct):
    """ Check label count/range, target validity, and (optionally) correct classification """
    if len(labels) != len(videos):
        raise ShapeError("Number of labels does not match number of clips",
                         labels.shape, videos.shape[:1])
    if np.any((labels < 0) | (labels >= model.num_classes)):
        raise AttackError("Labels must be in range 0-%d" % (model.num_classes-1))

    if config.mode == 'targeted':
        if not 0 <= config.target_label < model.num_classes:
            raise AttackError("Target label %d out of range 0-%d"
                              % (config.target_label, model.num_classes-1))
        if np.any(labels == config.target_label):
            raise AttackError("Target label %d equals the true label of %d clip(s)"
                              % (config.target_label, np.sum(labels == config.target_label)))

    if check_correct:
        correct = correctly_classified(model, videos, labels)
        if not correct.all():
            raise AttackError("Cannot attack misclassified clip(s) %s: model already predicts "
                              "a label other than the true label" % np.flatnonzero(~correct))
