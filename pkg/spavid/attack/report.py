# -*- coding: utf-8 -*-
"""
Attack outputs: perturbations and attack reports

Function list
-------------
- Perturbation :    Perturbation tensor E with per-frame norm accessors and VTEN I/O
- AttackReport :    Metrics, labels, and timing of one attack run, with JSON I/O

Function reference
------------------
"""
import os
import json
from dataclasses import dataclass, field, asdict, fields
import numpy as np

from spavid.helpers import _to_builtin
from spavid.tensor.io import save_tensor, load_tensor
from spavid.attack.objectives import per_frame_l2


@dataclass
class Perturbation:
    """
    Adversarial perturbation E = X_adv - X of one clip (or shared by several clips)

    Attributes
    ----------
    data : ndarray, shape=(T,W,H,C)
    """
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)

    @property
    def shape(self):
        return self.data.shape

    @property
    def per_frame_l2(self):
        """ Euclidean norm ||E_t|| of each frame, shape=(T,) """
        return per_frame_l2(self.data)

    @property
    def norm_l21(self):
        """ Sum of per-frame Euclidean norms """
        return float(self.per_frame_l2.sum())

    @property
    def norm_l2(self):
        """ Frobenius norm over all entries """
        return float(np.sqrt((self.data**2).sum()))

    def save(self, filename):
        """ Write perturbation to a VTEN file """
        save_tensor(filename, self.data)

    @classmethod
    def load(cls, filename):
        """ Read perturbation from a VTEN file """
        return cls(load_tensor(filename, rank=4))


@dataclass
class AttackReport:
    """
    Metrics, labels, and timing of one attack run

    Single-clip runs store scalar video labels and 1d frame-label lists; runs over several
    clips (universal attacks) store one entry per clip.

    Attributes
    ----------
    success : bool
        Video label changed away from the true label (targeted: set to the target).
        For several clips, True only if every clip was fooled.
    fooling_rate : float
        Fraction of attacked clips fooled (F)
    perceptibility_map : float
        Mean absolute perturbation (P), in pixel_scale units
    sparsity : float
        Fraction of clean frames (S)
    per_frame_map : list of float
        Per-frame MAP
    frame_labels_before, frame_labels_after : list
        Frame-level labels on the clean/adversarial clip(s)
    video_label_before, video_label_after : int or list of int
        Video-level labels on the clean/adversarial clip(s)
    seconds_per_iteration : float
        Mean wall-clock time per Adam iteration
    """
    success: bool
    fooling_rate: float
    perceptibility_map: float
    sparsity: float
    per_frame_map: list
    frame_labels_before: list
    frame_labels_after: list
    video_label_before: object
    video_label_after: object
    seconds_per_iteration: float
    mode: str = 'single'
    norm: str = 'L21'
    lam: float = 1.0
    iterations: int = 0
    objective_initial: float = np.nan
    objective_final: float = np.nan
    target_label: int = None
    target_prob_initial: float = np.nan
    target_prob_final: float = np.nan
    successes: list = field(default_factory=list)
    heldout_fooling_rate: float = np.nan
    n_clips: int = 1
    clip_ids: list = field(default_factory=list)
    seed: int = None

    def to_dict(self):
        """ Plain dict of all fields, with Numpy types converted to built-in types """
        return {key: _to_builtin(value) for key,value in asdict(self).items()}

    def to_json(self, indent=2):
        """ Serialize report as JSON text (fixed field names, in declaration order) """
        return json.dumps(self.to_dict(), indent=indent)

    def save(self, filename):
        """ Write report as JSON to given file """
        dirname = os.path.dirname(filename)
        if dirname: os.makedirs(dirname, exist_ok=True)
        with open(filename, 'w') as f:
            f.write(self.to_json())

    @classmethod
    def from_dict(cls, values):
        """ Create report from dict (eg loaded JSON). NaN floats are stored as null """
        names = {f.name for f in fields(cls)}
        values = {key: (np.nan if (value is None) and key in _FLOAT_FIELDS else value)
                  for key,value in values.items() if key in names}
        return cls(**values)

    @classmethod
    def load(cls, filename):
        """ Read report from JSON file """
        with open(filename, 'r') as f:
            return cls.from_dict(json.load(f))


_FLOAT_FIELDS = ('objective_initial', 'objective_final', 'target_prob_initial',
                 'target_prob_final', 'heldout_fooling_rate')

