# -*- coding: utf-8 -*-
"""
Attack objectives: surrogate loss, perturbation norms, and complete attack objectives

Overview
--------
The attack minimizes, over the perturbation E,

    lam * ||M.E||_p  -/+  l(1_y, J(X + M.E))

where J is the threat model's video-level probability vector, M the temporal mask (all ones
if no mask), and the surrogate loss l(u,v) = log(1 - u.v). The loss term is subtracted for
non-targeted attacks (pushing the true-class probability down) and added for targeted attacks
(with y the target class, pushing its probability up). With several clips sharing one E
(universal attack) the loss term is averaged over clips; with independent per-clip
perturbations the per-clip objectives are summed, so each clip's gradient depends only on
its own perturbation.

With `clip_pixels` set, the model sees each clip's adversarial pixels X_i + M.E clamped into
[0,1], with zero gradient for clamped entries.

Function list
-------------
- surrogate_loss :  log(1 - u.v) with clamped probability
- norm_l21 :        Sum over frames of each frame's Euclidean norm
- norm_l2 :         Frobenius norm over the whole perturbation
- per_frame_l2 :    Euclidean norm of each frame (plain ndarray computation)
- objective :       Complete attack objective as a differentiable Tensor

Function reference
------------------
"""
import numpy as np

from spavid.errors import ShapeError
from spavid.helpers import _one_hot, _isbinary
from spavid.tensor import Tensor, add, sub, mul, log, clip, tsum, tmean, reshape, stack, \
                          row_norms
from spavid.models.models import forward_batch
from spavid.attack.config import TemporalMask, norm_name


def surrogate_loss(u, v, clamp_eps=1e-6):
    """
    Surrogate loss log(1 - u.v) for one-hot label u and probability vector v

    The dot product u.v is clamped into [clamp_eps, 1-clamp_eps] so the loss stays finite for
    confident predictions.

    Parameters
    ----------
    u : array-like, shape=(K,) or (N,K)
        One-hot label vector(s)

    v : Tensor or array-like, shape=u.shape
        Probability vector(s)

    clamp_eps : float, default: 1e-6
        Probability clamp

    Returns
    -------
    loss : Tensor, shape=() or (N,)
    """
    u = np.asarray(u, dtype=float)
    v = v if isinstance(v,Tensor) else Tensor(v)
    if u.shape != v.shape:
        raise ShapeError("Label and probability vectors differ in dimension", u.shape, v.shape)
    assert _isbinary(u) and np.all(u.sum(axis=-1) == 1), \
        ValueError("u must be one-hot (a single 1 per vector)")

    prob = tsum(mul(v, u), axis=-1)
    return log(sub(1.0, clip(prob, clamp_eps, 1.0 - clamp_eps)))


def norm_l21(perturbation):
    """
    l2,1 norm: sum over frames of each frame's Euclidean norm

    The adjoint for frame t is E_t / max(||E_t||, 1e-12).

    Parameters
    ----------
    perturbation : Tensor or array-like
        Single clip, shape=(T,W,H,C) or (T,F), or batch of flattened clips, shape=(N,T,F),
        in which case the result is the sum of per-clip norms

    Returns
    -------
    norm : Tensor, shape=()
    """
    E = perturbation if isinstance(perturbation,Tensor) else Tensor(perturbation)
    return tsum(row_norms(reshape(E, (-1, E.shape[-1] if E.ndim < 4 else _frame_size(E)))))


def norm_l2(perturbation):
    """
    l2 (Frobenius) norm over all entries of a perturbation

    Parameters
    ----------
    perturbation : Tensor or array-like
        Single clip, any shape (for batches of flattened clips (N,T,F), use
        :func:`objective`, which sums per-clip norms)

    Returns
    -------
    norm : Tensor, shape=()
    """
    E = perturbation if isinstance(perturbation,Tensor) else Tensor(perturbation)
    return tsum(row_norms(reshape(E, (1,-1))))


def per_frame_l2(perturbation):
    """ Euclidean norm of each frame of a (T,...) perturbation, as an ndarray """
    E = np.asarray(getattr(perturbation, 'data', perturbation), dtype=float)
    return np.sqrt((E.reshape(E.shape[0],-1)**2).sum(axis=1))


def objective(model, videos, labels, perturbation, config, shared=None):
    """
    Complete attack objective for a given perturbation, as a differentiable Tensor

    lam * ||M.E||_p - l(1_y, J(X + M.E))    (non-targeted; summed or averaged over clips)
    lam * ||M.E||_p + l(1_y*, J(X + M.E))   (targeted, y* = config.target_label)

    Parameters
    ----------
    model : ThreatModel
        Model under attack

    videos : array-like, shape=(T,W,H,C) or (N,T,W,H,C)
        Clean clip(s) X

    labels : int or array-like of int, shape=(N,)
        True label(s)

    perturbation : Tensor or array-like
        Perturbation E. Shape=(T,W,H,C) (or (T,F)) for one perturbation shared by all clips,
        or (N,T,F) for independent per-clip perturbations (flattened frames).

    config : AttackConfig
        Attack settings (mode, norm, lam, mask, target_label, prob_clamp_eps, clip_pixels)

    shared : bool, default: (inferred from perturbation rank)
        If True, loss terms are averaged over clips (universal objective); if False, per-clip
        objectives are summed (independent attacks). Inferred as True for a rank-4 or rank-2
        perturbation, False for rank 3.

    Returns
    -------
    value : Tensor, shape=()
    """
    X = np.asarray(videos, dtype=float)
    if X.ndim == 4: X = X[np.newaxis]
    if X.ndim != 5:
        raise ShapeError("videos must be (T,W,H,C) or (N,T,W,H,C)", X.shape)
    n_clips, n_frames = X.shape[:2]
    n_features = int(np.prod(X.shape[2:]))
    X = X.reshape(n_clips, n_frames, n_features)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    if len(labels) != n_clips:
        raise ShapeError("Number of labels does not match number of clips",
                         labels.shape, (n_clips,))

    E = perturbation if isinstance(perturbation,Tensor) else Tensor(perturbation)
    if shared is None: shared = E.ndim != 3

    if shared:
        if E.size != n_frames*n_features:
            raise ShapeError("Shared perturbation does not match clip shape", E.shape,
                             X.shape[1:])
        E = reshape(E, (n_frames, n_features))
    elif E.shape != X.shape:
        raise ShapeError("Per-clip perturbations must be (N,T,F) matching clips", E.shape, X.shape)

    # Masked perturbation M.E
    if config.mask is not None:
        mask = config.mask if isinstance(config.mask,TemporalMask) else TemporalMask(config.mask)
        E = mul(E, mask.as_array(E.shape, time_axis=E.ndim-2))

    # Regularizer
    if norm_name(config.norm) == 'L21':
        reg = norm_l21(E)
    elif shared:
        reg = norm_l2(E)
    else:
        reg = tsum(row_norms(reshape(E, (n_clips,-1))))

    # Loss term, on each clip's adversarial pixels clamped into [0,1]
    E_full = stack([E]*n_clips, axis=0) if shared else E
    adversarial = add(Tensor(X), E_full)
    if config.clip_pixels: adversarial = clip(adversarial, 0.0, 1.0)
    _, video_probs = forward_batch(model, adversarial)

    if config.mode == 'targeted':
        onehot = _one_hot(np.full(n_clips, config.target_label), model.num_classes)
    else:
        onehot = _one_hot(labels, model.num_classes)
    losses = surrogate_loss(onehot, video_probs, config.prob_clamp_eps)
    loss = tmean(losses) if shared else tsum(losses)

    reg = mul(reg, config.lam)
    return add(reg, loss) if config.mode == 'targeted' else sub(reg, loss)


def _frame_size(E):
    """ Number of entries in one frame of a (T,W,H,C) perturbation """
    return int(np.prod(E.shape[1:]))
