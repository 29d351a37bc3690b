# -*- coding: utf-8 -*-
"""
Attack evaluation metrics: fooling rate, perceptibility, and sparsity

Overview
--------
- **Fooling rate (F)**: fraction of attacked clips whose video-level label was successfully
  changed (or, for targeted attacks, set to the target)
- **Perceptibility (P)**: Mean Absolute Perturbation (MAP) per pixel, averaged over channels.
  Reported in 0-255 units by default (`pixel_scale` = 255), while pixel values themselves
  live in [0,1].
- **Sparsity (S)**: fraction of frames carrying no perturbation, ie K/T for K clean frames
  out of T. A frame counts as clean if its MAP is below `zero_threshold` (in 0-1 units).

Perturbations can be given for a single clip, shape=(T,W,H,C), or a batch of clips,
shape=(N,T,W,H,C). Per-frame values for a batch are averaged across clips.

Function list
-------------
- fooling_rate :        Fraction of successful attacks
- per_frame_map :       Mean absolute perturbation of each frame
- map_perceptibility :  Mean absolute perturbation over all pixels (P)
- sparsity :            Fraction of clean frames (S)
- metric_set :          Compute all metrics at once -> MetricSet

Function reference
------------------
"""
from dataclasses import dataclass, field
import numpy as np

from spavid.errors import ShapeError

PIXEL_SCALE = 255.0
ZERO_THRESHOLD = 1e-4


@dataclass
class MetricSet:
    """
    Fooling rate, perceptibility, sparsity, and per-frame MAP of an attack

    Attributes
    ----------
    fooling_rate : float in [0,1]
    perceptibility : float >= 0
        MAP in units of `pixel_scale`
    sparsity : float in [0,1]
    per_frame_map : ndarray, shape=(T,)
    """
    fooling_rate: float
    perceptibility: float
    sparsity: float
    per_frame_map: np.ndarray = field(repr=False)


def fooling_rate(successes):
    """
    Fraction of attacked clips that were successfully fooled

    Parameters
    ----------
    successes : array-like of bool, shape=(n,)
        Success flag for each attacked clip

    Returns
    -------
    rate : float in [0,1]
    """
    successes = np.asarray(successes, dtype=bool).reshape(-1)
    if successes.size == 0:
        raise ValueError("Cannot compute fooling rate of an empty list of attack results")
    return float(successes.sum() / successes.size)


def per_frame_map(perturbation, pixel_scale=PIXEL_SCALE):
    """
    Mean absolute perturbation (MAP) of each frame

    Parameters
    ----------
    perturbation : array-like, shape=(T,W,H,C) or (N,T,W,H,C)
        Perturbation(s). For a batch, per-frame values are averaged across clips.

    pixel_scale : float, default: 255
        Multiplier converting [0,1] pixel units to reporting units

    Returns
    -------
    map_values : ndarray, shape=(T,)
    """
    perturbation = np.abs(np.asarray(getattr(perturbation, 'data', perturbation), dtype=float))
    if perturbation.ndim == 4:
        return perturbation.mean(axis=(1,2,3)) * pixel_scale
    elif perturbation.ndim == 5:
        return perturbation.mean(axis=(0,2,3,4)) * pixel_scale
    else:
        raise ShapeError("Perturbation must be (T,W,H,C) or (N,T,W,H,C)", perturbation.shape)


def map_perceptibility(perturbation, pixel_scale=PIXEL_SCALE):
    """
    Perceptibility P: mean absolute perturbation over all pixels and channels

    A uniform perturbation of d in every channel reports d*pixel_scale.

    Parameters
    ----------
    perturbation : array-like, any shape
        Perturbation(s)

    pixel_scale : float, default: 255
        Multiplier converting [0,1] pixel units to reporting units

    Returns
    -------
    P : float >= 0
    """
    perturbation = np.asarray(getattr(perturbation, 'data', perturbation), dtype=float)
    if perturbation.size == 0: return 0.0
    return float(np.abs(perturbation).mean() * pixel_scale)


def sparsity(frame_map, zero_threshold=ZERO_THRESHOLD, pixel_scale=PIXEL_SCALE):
    """
    Sparsity S: fraction of frames whose MAP is below the zero threshold

    Parameters
    ----------
    frame_map : array-like, shape=(T,)
        Per-frame MAP values, in units of `pixel_scale` (see :func:`per_frame_map`)

    zero_threshold : float, default: 1e-4
        Threshold for a "clean" frame, in [0,1] pixel units

    pixel_scale : float, default: 255
        Units of `frame_map`

    Returns
    -------
    S : float in {0, 1/T, ..., 1}
    """
    frame_map = np.asarray(frame_map, dtype=float).reshape(-1)
    if frame_map.size == 0:
        raise ValueError("Sparsity requires at least one frame")
    n_clean = np.sum(frame_map < zero_threshold*pixel_scale)
    return float(n_clean / frame_map.size)


def metric_set(perturbation, successes, pixel_scale=PIXEL_SCALE, zero_threshold=ZERO_THRESHOLD):
    """
    Compute fooling rate, perceptibility, sparsity, and per-frame MAP at once

    Parameters
    ----------
    perturbation : array-like, shape=(T,W,H,C) or (N,T,W,H,C)
        Effective perturbation(s) of the attacked clips

    successes : array-like of bool, shape=(n,)
        Success flag for each attacked clip

    pixel_scale, zero_threshold : float
        See :func:`per_frame_map`, :func:`sparsity`

    Returns
    -------
    metrics : MetricSet
    """
    frame_map = per_frame_map(perturbation, pixel_scale=pixel_scale)
    return MetricSet(fooling_rate=fooling_rate(successes),
                     perceptibility=float(frame_map.mean()),
                     sparsity=sparsity(frame_map, zero_threshold, pixel_scale),
                     per_frame_map=frame_map)
