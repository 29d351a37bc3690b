# -*- coding: utf-8 -*-
"""
Synthetic moving-shape video datasets and video/dataset I/O

Overview
--------
Each clip shows one object (a filled square or a cross) moving in a straight line across a
dim background, in one of four directions (right, left, down, up). Class labels combine both:

    label = shape*4 + direction,   shape in {0: square, 1: cross},
                                   direction in {0: right, 1: left, 2: down, 3: up}

so classes 2k and 2k+1 differ only in motion direction. Opposite directions traverse the
same set of positions in reverse order, so the multiset of frames in a clip carries no
direction information: telling left from right requires temporal order. This is what makes
a stateless pooling head fall to chance on direction while recurrent heads do not.

Video arrays are (T,W,H,C): frames, x (width), y (height), channels. Pixel values are in
[0,1] and rounded to float32-representable values so clips round-trip bit-exactly through
VTEN files.

Dataset directory layout::

    <dirname>/manifest          one line per clip: "<id> <label> <relpath>"
    <dirname>/spec.json         generating SyntheticSpec
    <dirname>/train/<id>.vten
    <dirname>/test/<id>.vten

Function list
-------------
- SyntheticSpec :           Parameters of a synthetic dataset
- LabeledVideo :            One clip with its label and id
- simulate_video :          Simulate a single clip of a given class
- generate :                Simulate a full dataset -> stratified 70/30 train/test split
- stack_videos :            List of LabeledVideo -> (videos, labels, ids) arrays
- save_video, load_video :  VTEN I/O of single clips
- save_dataset, load_dataset : Dataset directory I/O
- frame_probe_accuracy :    Direction accuracy of a single-frame classifier (temporal-dependence check)

Function reference
------------------
"""
import os
import json
import hashlib
import logging
from dataclasses import dataclass, asdict, field
import numpy as np

from sklearn.model_selection import train_test_split
from sklearn.linear_model import LogisticRegression

from spavid.errors import FormatError, ShapeError
from spavid.helpers import _check_video_array, _to_float32_grid
from spavid.utils import make_rng
from spavid.tensor.io import save_tensor, load_tensor

logger = logging.getLogger(__name__)

SHAPES = ('square', 'cross')
DIRECTIONS = ('right', 'left', 'down', 'up')

BACKGROUND = 0.1
AMPLITUDE = 0.8
TEST_SIZE = 0.3


# =============================================================================
# Dataset types
# =============================================================================
@dataclass
class SyntheticSpec:
    """
    Parameters of a synthetic moving-shape dataset

    Attributes
    ----------
    T : int, default: 40
        Frames per clip
    W, H : int, default: 16
        Frame width and height (each >= 4)
    C : int, default: 1
        Channels
    num_classes : {2,4,8}, default: 8
        2 = square moving right/left, 4 = square in all 4 directions, 8 = both shapes
    samples_per_class : int, default: 20
        Clips simulated per class
    noise_std : float, default: 0.02
        SD of additive Gaussian pixel noise
    seed : int, default: 0
        Random seed
    """
    T: int = 40
    W: int = 16
    H: int = 16
    C: int = 1
    num_classes: int = 8
    samples_per_class: int = 20
    noise_std: float = 0.02
    seed: int = 0

    def validate(self):
        """ Check parameters are valid. Returns self. Raises ValueError otherwise """
        if (self.W < 4) or (self.H < 4):
            raise ValueError("Frame dims W,H must each be >= 4 (got W=%d, H=%d)" % (self.W,self.H))
        if self.T < 2:
            raise ValueError("Clips need T >= 2 frames to show motion (got T=%d)" % self.T)
        if self.C < 1:
            raise ValueError("C must be >= 1 (got %d)" % self.C)
        if self.num_classes not in (2,4,8):
            raise ValueError("num_classes must be 2, 4, or 8 (got %d)" % self.num_classes)
        if self.samples_per_class < 4:
            raise ValueError("samples_per_class must be >= 4 for a stratified 70/30 split "
                             "(got %d)" % self.samples_per_class)
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0 (got %s)" % self.noise_std)
        return self

    @property
    def frame_shape(self):
        return (self.W, self.H, self.C)

    @property
    def dataset_id(self):
        """ Short stable hash identifying datasets generated from this spec """
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.md5(text.encode('utf-8')).hexdigest()[:12]


@dataclass
class LabeledVideo:
    """ One clip X (shape=(T,W,H,C)) with its class label and identifier """
    video: np.ndarray = field(repr=False)
    label: int
    id: str


# =============================================================================
# Simulation
# =============================================================================
def simulate_video(label, spec=None, rng=None):
    """
    Simulate a single clip of an object of given class moving across a noisy background

    The object's path runs between a start position in [0,1] and an end position in
    [L-s-1, L-s] along the motion axis (L = frame extent, s = object size), with a random
    fixed position along the other axis. Leftward/upward clips traverse the path in reverse.
    Subpixel positions are rendered by bilinear interpolation.

    Parameters
    ----------
    label : int
        Class label (shape*4 + direction), < spec.num_classes

    spec : SyntheticSpec, default: SyntheticSpec()
        Dataset parameters

    rng : np.random.Generator or int, default: None
        Random generator (or seed)

    Returns
    -------
    video : ndarray, shape=(T,W,H,C)
        Pixel values in [0,1], float32-representable
    """
    spec = (SyntheticSpec() if spec is None else spec).validate()
    rng = make_rng(rng)
    assert 0 <= label < spec.num_classes, \
        ValueError("label must be in range 0-%d, got %d" % (spec.num_classes-1, label))
    shape, direction = divmod(int(label), 4)

    size = max(2, min(spec.W, spec.H)//4)
    template = _object_template(SHAPES[shape], size)

    # Motion along x (axis 0 of frame) for right/left, along y for down/up
    axis = 0 if DIRECTIONS[direction] in ('right','left') else 1
    extent = (spec.W, spec.H)
    start = rng.uniform(0, 1)
    end = rng.uniform(extent[axis] - size - 1, extent[axis] - size)
    path = np.linspace(start, end, spec.T)
    if DIRECTIONS[direction] in ('left','up'): path = path[::-1]
    other = rng.uniform(0, extent[1-axis] - size)

    video = np.full((spec.T, spec.W, spec.H), BACKGROUND)
    for t,pos in enumerate(path):
        xy = (pos, other) if axis == 0 else (other, pos)
        video[t] += AMPLITUDE*_place_template(template, xy, (spec.W, spec.H))

    video = np.repeat(video[...,np.newaxis], spec.C, axis=-1)
    if spec.noise_std > 0:
        video = video + spec.noise_std*rng.standard_normal(video.shape)

    return _to_float32_grid(np.clip(video, 0.0, 1.0))


def generate(spec=None):
    """
    Simulate a full synthetic dataset and split it 70/30 into train/test sets

    The split is stratified by class. Clips are deterministic given `spec.seed`.

    Parameters
    ----------
    spec : SyntheticSpec, default: SyntheticSpec()
        Dataset parameters

    Returns
    -------
    train, test : list of LabeledVideo
        Train and test clips, each sorted by id
    """
    spec = (SyntheticSpec() if spec is None else spec).validate()
    rng = make_rng(spec.seed)

    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    clips = [LabeledVideo(simulate_video(label, spec, rng), int(label), 'clip%05d' % i)
             for i,label in enumerate(labels)]

    train_idxs, test_idxs = train_test_split(np.arange(len(clips)), test_size=TEST_SIZE,
                                             stratify=labels, random_state=spec.seed)
    train = [clips[i] for i in sorted(train_idxs)]
    test = [clips[i] for i in sorted(test_idxs)]
    logger.debug("Generated dataset %s: %d train, %d test clips",
                 spec.dataset_id, len(train), len(test))

    return train, test


def stack_videos(items):
    """
    Convert list of LabeledVideo to arrays

    Returns
    -------
    videos : ndarray, shape=(N,T,W,H,C)
    labels : ndarray of int, shape=(N,)
    ids : list of str
    """
    if len(items) == 0:
        raise ValueError("Cannot stack an empty list of clips")
    return np.stack([item.video for item in items]), \
           np.asarray([item.label for item in items], dtype=int), \
           [item.id for item in items]


# =============================================================================
# Video and dataset I/O
# =============================================================================
def save_video(filename, video):
    """ Write a (T,W,H,C) clip to a VTEN file """
    save_tensor(filename, _check_video_array(video))


def load_video(filename):
    """
    Read a (T,W,H,C) clip from a VTEN file

    Raises
    ------
    FormatError
        If file is not a valid rank-4 VTEN tensor with at least one frame
    """
    video = load_tensor(filename, rank=4)
    if video.shape[0] == 0:
        raise FormatError("Video file '%s' has zero frames" % filename)
    return video


def save_dataset(dirname, train, test, spec=None):
    """
    Write train/test clips to a dataset directory (manifest + one VTEN file per clip)

    Parameters
    ----------
    dirname : str
        Dataset directory. Created if needed.

    train, test : list of LabeledVideo
        Clips of each split

    spec : SyntheticSpec, optional
        Generating spec, saved as spec.json
    """
    lines = []
    for split,items in (('train',train), ('test',test)):
        for item in items:
            relpath = '%s/%s.vten' % (split, item.id)
            save_video(os.path.join(dirname, relpath), item.video)
            lines.append('%s %d %s' % (item.id, item.label, relpath))

    with open(os.path.join(dirname, 'manifest'), 'w') as f:
        f.write('\n'.join(lines) + '\n')
    if spec is not None:
        with open(os.path.join(dirname, 'spec.json'), 'w') as f:
            json.dump(asdict(spec), f, indent=2, sort_keys=True)


def load_dataset(dirname):
    """
    Read a dataset directory written by :func:`save_dataset`

    Returns
    -------
    train, test : list of LabeledVideo
    spec : SyntheticSpec or None
        Generating spec, if spec.json is present
    """
    manifest = os.path.join(dirname, 'manifest')
    if not os.path.isfile(manifest):
        raise FileNotFoundError("No dataset manifest found at '%s'" % manifest)

    splits = {'train': [], 'test': []}
    with open(manifest, 'r') as f:
        for n_line,line in enumerate(f):
            if not line.strip(): continue
            fields = line.split()
            if len(fields) != 3:
                raise FormatError("Bad manifest line %d: '%s'" % (n_line+1, line.strip()))
            clip_id, label, relpath = fields
            split = relpath.split('/')[0]
            if split not in splits:
                raise FormatError("Manifest path '%s' is not under train/ or test/" % relpath)
            video = load_video(os.path.join(dirname, relpath))
            splits[split].append(LabeledVideo(video, int(label), clip_id))

    spec = None
    spec_file = os.path.join(dirname, 'spec.json')
    if os.path.isfile(spec_file):
        with open(spec_file, 'r') as f:
            spec = SyntheticSpec(**json.load(f))

    return splits['train'], splits['test'], spec


# =============================================================================
# Dataset checks
# =============================================================================
def frame_probe_accuracy(videos, labels, seed=None):
    """
    Direction accuracy of a classifier that sees single frames only

    Fits a logistic-regression probe to individual frames (labeled with their clip's class)
    from 70% of clips, and scores the held-out clips' frames with direction accuracy (chance
    = 0.5; see :func:`spavid.models.direction_accuracy`). Values near 0.5 confirm that
    motion direction is not recoverable without temporal order.

    Parameters
    ----------
    videos : ndarray, shape=(N,T,W,H,C)
    labels : array-like of int, shape=(N,)
    seed : int, default: None

    Returns
    -------
    accuracy : float
    """
    from spavid.models.train import direction_accuracy

    videos = np.asarray(videos, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if videos.ndim != 5:
        raise ShapeError("videos must be (N,T,W,H,C)", videos.shape)
    n_clips, n_frames = videos.shape[:2]

    train_idxs, test_idxs = train_test_split(np.arange(n_clips), test_size=TEST_SIZE,
                                             stratify=labels, random_state=seed)
    frames = lambda idxs: videos[idxs].reshape(len(idxs)*n_frames, -1)
    frame_labels = lambda idxs: np.repeat(labels[idxs], n_frames)

    probe = LogisticRegression(max_iter=2000)
    probe.fit(frames(train_idxs), frame_labels(train_idxs))
    predicted = probe.predict(frames(test_idxs))

    return direction_accuracy(predicted, frame_labels(test_idxs))


def _object_template(shape, size):
    """ (size,size) binary image of a filled square or a cross (plus sign) """
    if shape == 'square':
        return np.ones((size,size))

    template = np.zeros((size,size))
    width = max(1, size//3)
    lo = (size - width)//2
    template[lo:lo+width,:] = 1
    template[:,lo:lo+width] = 1
    return template


def _place_template(template, xy, frame_shape):
    """ Render template at subpixel position (x,y) of top-left corner by bilinear weights """
    size = template.shape[0]
    canvas = np.zeros((frame_shape[0]+size+1, frame_shape[1]+size+1))
    ix, iy = int(np.floor(xy[0])), int(np.floor(xy[1]))
    fx, fy = xy[0] - ix, xy[1] - iy

    for dx,wx in ((0,1-fx), (1,fx)):
        for dy,wy in ((0,1-fy), (1,fy)):
            canvas[ix+dx:ix+dx+size, iy+dy:iy+dy+size] += wx*wy*template

    return canvas[:frame_shape[0], :frame_shape[1]]
