# -*- coding: utf-8 -*-
"""
Adam optimizer state/updates and pixel-range projection

Function list
-------------
- AdamState :               Adam hyperparameters and moment estimates for one parameter array
- adam_step :               One bias-corrected Adam update
- clip_to_valid :           Clamp adversarial video into valid pixel range [0,1]
- effective_perturbation :  Perturbation actually seen by the model after pixel clipping

Function reference
------------------
"""
from dataclasses import dataclass
import numpy as np

from spavid.errors import ShapeError


@dataclass
class AdamState:
    """
    Adam hyperparameters and running moment estimates for one parameter array

    Attributes
    ----------
    lr : float, default: 1e-2
    beta1 : float, default: 0.9
    beta2 : float, default: 0.999
    eps : float, default: 1e-8
    step : int
        Number of updates taken so far
    m, v : ndarray or None
        First/second moment estimates (None until the first step)
    """
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = None
    v: np.ndarray = None


def adam_step(state, grad, params):
    """
    One Adam update with bias-corrected moment estimates

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    params <- params - lr * m_hat / (sqrt(v_hat) + eps),  m_hat = m/(1-b1^t), v_hat = v/(1-b2^t)

    Parameters
    ----------
    state : AdamState
        Optimizer state. Updated in-place.

    grad : array-like
        Gradient of objective wrt `params`

    params : array-like
        Current parameter values. Not altered.

    Returns
    -------
    params : ndarray
        Updated parameter values

    state : AdamState
        Same (updated) state object
    """
    grad = np.asarray(grad, dtype=float)
    params = np.asarray(params, dtype=float)
    if grad.shape != params.shape:
        raise ShapeError("Gradient shape must match parameter shape", grad.shape, params.shape)
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    elif state.m.shape != params.shape:
        raise ShapeError("Adam state shape does not match parameters", state.m.shape, params.shape)

    state.step += 1
    state.m = state.beta1*state.m + (1.0 - state.beta1)*grad
    state.v = state.beta2*state.v + (1.0 - state.beta2)*grad*grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)

    return params - state.lr*m_hat/(np.sqrt(v_hat) + state.eps), state


def clip_to_valid(video_adv, clip_pixels=True):
    """
    Clamp adversarial video values into the valid pixel range [0,1]

    Parameters
    ----------
    video_adv : array-like
        Adversarial video X + E

    clip_pixels : bool, default: True
        If False, values are returned unchanged (as a copy)

    Returns
    -------
    video_adv : ndarray
    """
    video_adv = np.array(video_adv, dtype=float)
    return np.clip(video_adv, 0.0, 1.0) if clip_pixels else video_adv


def effective_perturbation(video, perturbation, clip_pixels=True):
    """ Perturbation the model actually sees: clip_to_valid(X + E) - X """
    video = np.asarray(video, dtype=float)
    return clip_to_valid(video + perturbation, clip_pixels) - video
