# -*- coding: utf-8 -*-
"""
Attack configuration and temporal masks

Function list
-------------
- AttackConfig :    Attack hyperparameters (mode, norm, lambda, Adam settings, ...)
- TemporalMask :    Per-frame binary mask selecting which frames may carry perturbation
- prefix_mask :     Mask polluting only the first n frames of a clip

Function reference
------------------
"""
from dataclasses import dataclass, asdict, replace
import numpy as np

from spavid.errors import ShapeError
from spavid.helpers import _isbinary

MODES = ('single', 'universal', 'masked', 'targeted')
NORMS = ('L2', 'L21')

_NORM_ALIASES = {'l2': 'L2', 'l21': 'L21', 'l2,1': 'L21', 'l2_1': 'L21', 'l2-1': 'L21'}


def norm_name(norm):
    """ Convert any accepted spelling of a norm to its canonical name ('L2' or 'L21') """
    assert isinstance(norm,str) and (norm.lower() in _NORM_ALIASES), \
        ValueError("Unsupported norm '%s'. Use 'L2' or 'L21'" % norm)
    return _NORM_ALIASES[norm.lower()]


# =============================================================================
# Temporal masks
# =============================================================================
@dataclass(frozen=True, eq=False)
class TemporalMask:
    """
    Per-frame binary mask M. Frames with bit 0 are forced to carry zero perturbation.

    Attributes
    ----------
    bits : ndarray of float {0,1}, shape=(T,)
    """
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size == 0:
            raise ShapeError("Temporal mask must be a nonempty 1d vector", bits.shape)
        assert _isbinary(bits), ValueError("Temporal mask bits must all be 0 or 1")
        object.__setattr__(self, 'bits', bits.astype(float))

    @classmethod
    def from_bits(cls, bits):
        """ Create mask from any binary sequence (list of 0/1, bools, ...) """
        return cls(np.asarray(bits))

    @property
    def T(self):
        """ Number of frames """
        return len(self.bits)

    @property
    def K(self):
        """ Number of clean (masked-out) frames """
        return int(np.sum(self.bits == 0))

    @property
    def sparsity(self):
        """ S = K/T """
        return self.K / self.T

    @property
    def polluted_frames(self):
        """ Indexes of frames allowed to carry perturbation """
        return np.flatnonzero(self.bits)

    def as_array(self, shape, time_axis=0):
        """
        Broadcast bits to a full array of given shape, frames along `time_axis`

        Returns a float ndarray of 0's and 1's
        """
        if shape[time_axis] != self.T:
            raise ShapeError("Mask length %d does not match number of frames" % self.T,
                             (self.T,), tuple(shape))
        bshape = [1]*len(shape)
        bshape[time_axis] = self.T
        return np.broadcast_to(self.bits.reshape(bshape), shape).astype(float)

    def apply(self, perturbation, time_axis=0):
        """
        Zero out perturbation in masked-out frames, leaving other frames exactly unchanged

        Parameters
        ----------
        perturbation : array-like
            Perturbation with frames along `time_axis`

        Returns
        -------
        masked : ndarray, shape=perturbation.shape
        """
        perturbation = np.asarray(perturbation, dtype=float)
        keep = self.as_array(perturbation.shape, time_axis=time_axis) != 0
        return np.where(keep, perturbation, 0.0)


def prefix_mask(n_frames, n_polluted):
    """
    Mask polluting only the first `n_polluted` frames of an `n_frames` clip

    Parameters
    ----------
    n_frames : int
        Clip length T

    n_polluted : int
        Number of leading frames allowed to carry perturbation, 0 <= n_polluted <= T

    Returns
    -------
    mask : TemporalMask
        Mask with K = T - n_polluted clean frames
    """
    assert 0 <= n_polluted <= n_frames, \
        ValueError("n_polluted must be in range 0-%d, got %d" % (n_frames, n_polluted))
    bits = np.zeros(n_frames)
    bits[:n_polluted] = 1
    return TemporalMask(bits)


# =============================================================================
# Attack configuration
# =============================================================================
@dataclass
class AttackConfig:
    """
    Attack hyperparameters

    Attributes
    ----------
    mode : {'single','universal','masked','targeted'}, default: 'single'
        Attack objective. 'masked' requires `mask`; 'targeted' requires `target_label`.
        'targeted' also honors `mask` if one is given.

    norm : {'L2','L21'}, default: 'L21'
        Regularization norm. 'L2' is the Frobenius norm over the whole perturbation,
        'L21' the sum over frames of each frame's Euclidean norm.

    lam : float, default: 1.0
        Regularization weight lambda (> 0)

    lr, beta1, beta2, eps : float
        Adam learning rate (default 1e-2), moment decays (0.9, 0.999) and epsilon (1e-8)

    iters : int, default: 500
        Number of Adam steps

    init_scale : float, default: 1e-4
        Initial value of every perturbation entry (> 0, as a zero perturbation has an
        undefined l2,1 gradient)

    mask : TemporalMask or None
        Temporal mask M

    target_label : int or None
        Target class for targeted attacks

    clip_pixels : bool, default: True
        Clamp adversarial video into [0,1] after each step

    prob_clamp_eps : float, default: 1e-6
        Probability clamp inside the surrogate loss

    pixel_scale : float, default: 255
        Units for reported perceptibility/per-frame MAP

    zero_threshold : float, default: 1e-4
        MAP threshold (0-1 units) below which a frame counts as clean
    """
    mode: str = 'single'
    norm: str = 'L21'
    lam: float = 1.0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iters: int = 500
    init_scale: float = 1e-4
    mask: TemporalMask = None
    target_label: int = None
    clip_pixels: bool = True
    prob_clamp_eps: float = 1e-6
    pixel_scale: float = 255.0
    zero_threshold: float = 1e-4

    def __post_init__(self):
        if isinstance(self.norm,str) and (self.norm.lower() in _NORM_ALIASES):
            self.norm = norm_name(self.norm)
        if (self.mask is not None) and not isinstance(self.mask,TemporalMask):
            self.mask = TemporalMask.from_bits(self.mask)

    def validate(self):
        """
        Check configuration is consistent. Returns self, so calls can be chained.

        Raises ValueError on any invalid setting
        """
        if self.mode not in MODES:
            raise ValueError("Unsupported attack mode '%s'. Use %s" % (self.mode, MODES))
        if self.norm not in NORMS:
            raise ValueError("Unsupported norm '%s'. Use 'L2' or 'L21'" % self.norm)
        if not self.lam > 0:
            raise ValueError("lambda must be > 0, got %s" % self.lam)
        if not self.init_scale > 0:
            raise ValueError("init_scale must be > 0 (zero init leaves the l2,1 gradient "
                             "undefined), got %s" % self.init_scale)
        if (self.iters < 0) or (int(self.iters) != self.iters):
            raise ValueError("iters must be a nonnegative integer, got %s" % self.iters)
        if not 0 < self.prob_clamp_eps < 0.5:
            raise ValueError("prob_clamp_eps must be in (0,0.5), got %s" % self.prob_clamp_eps)
        if not (self.lr > 0 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("Invalid Adam settings lr=%s, beta1=%s, beta2=%s, eps=%s"
                             % (self.lr, self.beta1, self.beta2, self.eps))
        if (self.mode == 'masked') and (self.mask is None):
            raise ValueError("Masked attack mode requires a temporal mask")
        if (self.mode == 'targeted') and (self.target_label is None):
            raise ValueError("Targeted attack mode requires a target_label")
        return self

    def replace(self, **kwargs):
        """ Copy of config with given fields replaced """
        return replace(self, **kwargs)

    def to_dict(self):
        """ Plain dict of settings (mask as list of bits), for reports and config hashing """
        out = asdict(self)
        out['mask'] = None if self.mask is None else [int(b) for b in self.mask.bits]
        return out
