# -*- coding: utf-8 -*-
"""
Private helper functions for spavid code

These are functions used internally in one or more modules,
but not intended to be public-facing.
"""
from copy import deepcopy
import numpy as np

from spavid.errors import ShapeError


def _isbinary(x):
    """ Test whether variable contains only binary values in set {True,False,0,1} """
    x = np.asarray(x)
    return (x.dtype == bool) or \
           (np.issubdtype(x.dtype,np.number) and \
            np.all(np.isin(x,[0,0.0,1,1.0,True,False])))


def _to_builtin(value):
    """ Convert Numpy scalars/arrays (nested in lists, dicts) to JSON-compatible built-in types """
    if isinstance(value, np.ndarray): value = value.tolist()
    if isinstance(value, dict): return {key: _to_builtin(v) for key,v in value.items()}
    if isinstance(value, (list, tuple)): return [_to_builtin(v) for v in value]
    if isinstance(value, (np.bool_, bool)): return bool(value)
    if isinstance(value, np.integer): return int(value)
    if isinstance(value, (np.floating, float)):
        return None if not np.isfinite(value) else float(value)
    return value


def _merge_dicts(dict1, dict2):
    """ Merge two dictionaries, with values in dict2 overriding (default) values in dict1 """
    dict_out = deepcopy(dict1)
    dict_out.update(dict2)
    return dict_out


def _check_video_array(video, name='video'):
    """
    Ensure an array-like holds a single (T,W,H,C) video with at least one frame

    Returns the video as a float64 ndarray
    """
    video = np.asarray(video, dtype=float)
    if video.ndim != 4:
        raise ShapeError("%s must be rank 4 (T,W,H,C), got rank %d" % (name,video.ndim),
                         video.shape)
    if video.shape[0] < 1:
        raise ShapeError("%s must contain at least one frame" % name, video.shape)
    return video


def _check_same_shapes(videos, name='videos'):
    """ Ensure all videos in a list share the same shape. Returns the common shape. """
    shapes = [np.shape(video) for video in videos]
    if len(shapes) == 0:
        raise ValueError("%s must contain at least one clip" % name)
    for shape in shapes[1:]:
        if shape != shapes[0]:
            raise ShapeError("All %s must share the same shape" % name, shapes[0], shape)
    return shapes[0]


def _one_hot(labels, n_classes):
    """ Convert (n,) integer labels -> (n,n_classes) one-hot float array """
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    assert (labels.min() >= 0) and (labels.max() < n_classes), \
        ValueError("labels must be in range 0-%d (got %d-%d)"
                   % (n_classes-1, labels.min(), labels.max()))
    out = np.zeros((len(labels),n_classes))
    out[np.arange(len(labels)),labels] = 1.0
    return out


def _to_float32_grid(data):
    """ Round float data to nearest float32-representable values (kept as float64) """
    return np.asarray(data, dtype=np.float32).astype(np.float64)
