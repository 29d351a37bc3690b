# -*- coding: utf-8 -*-
"""
Experiment configuration: settings dataclass, config-file parser, and config hash

Config file format
------------------
Flat ``key = value`` text. ``#`` starts a comment; blank lines are ignored. Values are parsed
as int, float, bool (true/false), ``none``, or left as strings; comma-separated values become
lists. Each key routes to the dataclass owning a field of that name: ExperimentConfig first,
then AttackConfig, then SyntheticSpec. The key ``lambda`` maps to AttackConfig.lam, and
``seed`` also seeds the synthetic dataset. Unknown keys raise ConfigError. Example::

    # sparsity sweep on 8-frame toy clips
    seed = 3
    T = 8
    head_kind = LSTM
    norm = L21
    lambda = 0.01
    polluted = 8, 4, 1

Function list
-------------
- ExperimentConfig :    All settings of one harness run
- parse_config_file :   Read config file -> dict of {key: value}
- parse_value :         Parse one config value string
- load_config :         Config file + overrides -> validated ExperimentConfig
- config_hash :         Short stable hash of an ExperimentConfig

Function reference
------------------
"""
import os
import json
import hashlib
from dataclasses import dataclass, field, fields, asdict, replace

from spavid.errors import ConfigError
from spavid.data import SyntheticSpec
from spavid.models.cells import HEAD_KINDS, head_kind_name
from spavid.attack.config import AttackConfig

KEY_ALIASES = {'lambda': 'lam', 'out-dir': 'out_dir', 'data-dir': 'data_dir',
               'model-dir': 'model_dir', 'n-jobs': 'n_jobs'}

# Settings with no effect on results, left out of the config hash
UNHASHED_FIELDS = ('out_dir', 'n_jobs', 'verbose')


@dataclass
class ExperimentConfig:
    """
    All settings of one harness run

    Attributes
    ----------
    seed : int, default: 0
        Seed for data generation, model initialization, and training. Recorded in every output.
    out_dir : str, default: 'results'
        Root output directory. Each command writes into a subdirectory named for it.
    data_dir : str, optional
        Saved dataset directory. If None, the dataset is simulated from `spec`.
    model_dir : str, optional
        Directory of saved models '<head_kind>.model'. Default: <out_dir>/models.
    head_kind : str, default: 'LSTM'
        Threat model head used by single-model commands
    head_kinds : list of str, default: all four head kinds
        Heads trained by `train` and compared by `transfer-matrix`
    hidden_size, encoder_dim : int, default: 16
        Threat model sizes
    epochs, train_lr, train_batch_size : training settings
    max_clips : int, optional
        Limit on the number of test clips attacked (first clips by id)
    polluted : list of int, default: [40,8,4,1]
        Polluted-prefix lengths of the sparsity sweep (each <= T)
    propagation_polluted : int, optional, default: 8
        Polluted-prefix length of the propagation report (None = unmasked)
    splice_lengths : list of int, default: [1,5,10,20,40]
        Sub-clip lengths N of the splice attack (each 1 <= N <= T)
    splice_universal : bool, default: False
        Splice attack uses one perturbation shared by all attacked sub-clips
    sparsities : list of float, default: [0,0.5,0.75,0.875,0.975]
        Sparsity grid of the timing command
    timing_iters : int, default: 50
        Measured Adam iterations per timing point (after a short warm-up)
    transfer_universal : bool, default: False
        Transfer matrix uses universal (instead of per-clip) perturbations
    batch_size : int, default: 8
        Clips per attack job
    n_jobs : int, default: 1
        Worker processes for attack jobs. Results do not depend on it.
    verbose : bool, default: False
    spec : SyntheticSpec
        Synthetic dataset settings
    attack : AttackConfig
        Attack settings
    """
    seed: int = 0
    out_dir: str = 'results'
    data_dir: str = None
    model_dir: str = None
    head_kind: str = 'LSTM'
    head_kinds: list = field(default_factory=lambda: list(HEAD_KINDS))
    hidden_size: int = 16
    encoder_dim: int = 16
    epochs: int = 40
    train_lr: float = 5e-3
    train_batch_size: int = 16
    max_clips: int = None
    polluted: list = field(default_factory=lambda: [40, 8, 4, 1])
    propagation_polluted: int = 8
    splice_lengths: list = field(default_factory=lambda: [1, 5, 10, 20, 40])
    splice_universal: bool = False
    sparsities: list = field(default_factory=lambda: [0.0, 0.5, 0.75, 0.875, 0.975])
    timing_iters: int = 50
    transfer_universal: bool = False
    batch_size: int = 8
    n_jobs: int = 1
    verbose: bool = False
    spec: SyntheticSpec = field(default_factory=SyntheticSpec)
    attack: AttackConfig = field(default_factory=AttackConfig)

    def __post_init__(self):
        for name in ('head_kinds', 'polluted', 'splice_lengths', 'sparsities'):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)): value = [value]
            setattr(self, name, list(value))
        self.head_kind = head_kind_name(self.head_kind)
        self.head_kinds = [head_kind_name(kind) for kind in self.head_kinds]
        if isinstance(self.spec, dict): self.spec = SyntheticSpec(**self.spec)
        if isinstance(self.attack, dict): self.attack = AttackConfig(**self.attack)

    @property
    def models_path(self):
        """ Directory holding saved models """
        return self.model_dir if self.model_dir is not None \
               else os.path.join(self.out_dir, 'models')

    def model_file(self, head_kind=None):
        """ Saved-model filename for given head kind (default: `head_kind`) """
        kind = self.head_kind if head_kind is None else head_kind_name(head_kind)
        return os.path.join(self.models_path, '%s.model' % kind)

    def validate(self):
        """
        Check settings are consistent and referenced paths exist. Returns self.

        Raises ConfigError otherwise
        """
        try:
            self.spec.validate()
            self.attack.validate()
        except ValueError as err:
            raise ConfigError(str(err))

        if (self.data_dir is not None) and not os.path.isdir(self.data_dir):
            raise ConfigError("Dataset directory '%s' does not exist" % self.data_dir)
        if (self.model_dir is not None) and not os.path.isdir(self.model_dir):
            raise ConfigError("Model directory '%s' does not exist" % self.model_dir)
        for name in ('hidden_size', 'encoder_dim', 'batch_size', 'n_jobs', 'train_batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError("%s must be >= 1, got %s" % (name, getattr(self, name)))
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0, got %s" % self.epochs)
        if (self.max_clips is not None) and (self.max_clips < 1):
            raise ConfigError("max_clips must be >= 1, got %s" % self.max_clips)
        if self.timing_iters < 1:
            raise ConfigError("timing_iters must be >= 1, got %s" % self.timing_iters)
        if any(not 0 <= s < 1 for s in self.sparsities):
            raise ConfigError("Timing sparsities must be in [0,1), got %s" % self.sparsities)
        return self

    def replace(self, **kwargs):
        """ Copy of config with given fields replaced """
        return replace(self, **kwargs)

    def to_dict(self):
        """ Plain, JSON-serializable dict of all settings """
        out = {f.name: getattr(self, f.name) for f in fields(self)
               if f.name not in ('spec', 'attack')}
        out['spec'] = asdict(self.spec)
        out['attack'] = self.attack.to_dict()
        return out


def parse_value(text):
    """
    Parse one config value string: int, float, bool, None, or str.
    Comma-separated values are parsed element-wise into a list.
    """
    text = text.strip()
    if ',' in text:
        return [parse_value(item) for item in text.split(',') if item.strip()]
    if text.lower() in ('true', 'false'): return text.lower() == 'true'
    if text.lower() in ('none', 'null', ''): return None
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            pass
    return text


def parse_config_file(filename):
    """
    Read a flat ``key = value`` config file

    Returns
    -------
    values : dict {str: value}
        Parsed values, keys normalized (eg 'lambda' -> 'lam'), in file order

    Raises
    ------
    ConfigError
        Missing file, or malformed line
    """
    if not os.path.isfile(filename):
        raise ConfigError("Config file '%s' does not exist" % filename)

    values = {}
    with open(filename, 'r') as f:
        for n_line,line in enumerate(f):
            line = line.split('#')[0].strip()
            if not line: continue
            if '=' not in line:
                raise ConfigError("%s line %d: expected 'key = value', got '%s'"
                                  % (filename, n_line+1, line))
            key, value = line.split('=', 1)
            key = key.strip()
            values[KEY_ALIASES.get(key, key)] = parse_value(value)

    return values


def load_config(filename=None, **overrides):
    """
    Build validated ExperimentConfig from an optional config file plus overrides

    Parameters
    ----------
    filename : str, optional
        Config file (see module docs for format)

    **overrides
        Settings overriding file values (eg from CLI flags). None values are ignored.
        Keys follow the same routing as config-file keys.

    Returns
    -------
    cfg : ExperimentConfig

    Raises
    ------
    ConfigError
        Unknown key, or invalid settings
    """
    values = parse_config_file(filename) if filename is not None else {}
    values.update({KEY_ALIASES.get(key, key): value for key,value in overrides.items()
                   if value is not None})

    experiment_keys = {f.name for f in fields(ExperimentConfig)} - {'spec', 'attack'}
    attack_keys = {f.name for f in fields(AttackConfig)}
    spec_keys = {f.name for f in fields(SyntheticSpec)}

    experiment, attack, spec = {}, {}, {}
    for key,value in values.items():
        if key in experiment_keys:  experiment[key] = value
        elif key in attack_keys:    attack[key] = value
        elif key in spec_keys:      spec[key] = value
        else:
            raise ConfigError("Unknown config key '%s'" % key)
    if 'seed' in experiment: spec.setdefault('seed', experiment['seed'])

    try:
        cfg = ExperimentConfig(**experiment, spec=SyntheticSpec(**spec),
                               attack=AttackConfig(**attack))
    except (TypeError, ValueError, AssertionError) as err:
        raise ConfigError("Invalid config: %s" % err)

    return cfg.validate()


def config_hash(cfg):
    """
    Short stable hash of the result-relevant settings of an ExperimentConfig

    md5 over canonical (sorted-key) JSON of all settings except output location and
    worker count; first 12 hex chars.
    """
    values = {key: value for key,value in cfg.to_dict().items() if key not in UNHASHED_FIELDS}
    text = json.dumps(values, sort_keys=True, separators=(',', ':'))
    return hashlib.md5(text.encode('utf-8')).hexdigest()[:12]
