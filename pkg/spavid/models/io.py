# -*- coding: utf-8 -*-
"""
Saving and loading threat models as VTEN-framed containers

Container layout::

    header block:   b'VTEN', u8 version (= 1), u8 rank (= 0), u32 LE byte length, UTF-8 JSON
    weight blocks:  one VTEN v1 tensor block per parameter, in the order named by the header

The JSON header holds head_kind, frame_shape, num_classes, hidden_size, encoder_dim,
dataset_id, and param_names. Parameters are stored as float32, so models whose weights are
float32-representable (all initialized and trained models are) round-trip bit-exactly.

Function list
-------------
- save_model :  Write a ThreatModel to a container file
- load_model :  Read a ThreatModel from a container file

Function reference
------------------
"""
import os
import json
import struct
from collections import OrderedDict

from spavid.errors import FormatError, UnsupportedVersionError
from spavid.tensor.io import MAGIC, VERSION, encode_tensor, decode_tensor
from spavid.models.models import ThreatModel, param_shapes
from spavid.models.cells import head_kind_name

_HEADER = struct.Struct('<4sBBI')


def save_model(filename, model):
    """
    Write a threat model to a VTEN-framed container file

    Parameters
    ----------
    filename : str
        Full-path name of file to write. Parent directory is created if needed.

    model : ThreatModel
        Model to save
    """
    header = {'head_kind':      model.head_kind,
              'frame_shape':    list(model.frame_shape),
              'num_classes':    model.num_classes,
              'hidden_size':    model.hidden_size,
              'encoder_dim':    model.encoder_dim,
              'dataset_id':     model.dataset_id,
              'param_names':    model.param_names}
    header = json.dumps(header, sort_keys=True).encode('utf-8')

    dirname = os.path.dirname(filename)
    if dirname: os.makedirs(dirname, exist_ok=True)
    with open(filename, 'wb') as f:
        f.write(_HEADER.pack(MAGIC, VERSION, 0, len(header)))
        f.write(header)
        for value in model.params.values():
            f.write(encode_tensor(value))


def load_model(filename):
    """
    Read a threat model from a VTEN-framed container file

    Parameters
    ----------
    filename : str
        Full-path name of file to read

    Returns
    -------
    model : ThreatModel

    Raises
    ------
    FormatError
        Bad magic, truncated file, corrupt header, or weights not matching header dims
    UnsupportedVersionError
        Container or weight block with version other than 1
    """
    with open(filename, 'rb') as f:
        buf = f.read()

    if len(buf) < _HEADER.size:
        raise FormatError("Truncated model file '%s' (%d bytes)" % (filename, len(buf)))
    magic, version, rank, n_bytes = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError("Bad model file magic %r (expected %r)" % (magic, MAGIC))
    if version != VERSION:
        raise UnsupportedVersionError("Unsupported model container version %d (only version %d "
                                      "is supported)" % (version, VERSION))
    if rank != 0:
        raise FormatError("Model container header block must have rank 0, got %d" % rank)
    if len(buf) < _HEADER.size + n_bytes:
        raise FormatError("Truncated model file '%s': header needs %d bytes" % (filename, n_bytes))

    try:
        header = json.loads(buf[_HEADER.size:_HEADER.size+n_bytes].decode('utf-8'))
        frame_shape = tuple(int(n) for n in header['frame_shape'])
        n_features = frame_shape[0]*frame_shape[1]*frame_shape[2]
        shapes = param_shapes(header['head_kind'], n_features, header['num_classes'],
                              header['hidden_size'], header['encoder_dim'])
    except (ValueError, KeyError, TypeError, IndexError, AssertionError) as err:
        raise FormatError("Corrupt model header in '%s': %s" % (filename, err))

    if list(shapes.keys()) != list(header['param_names']):
        raise FormatError("Model header parameter names %s do not match head kind '%s'"
                          % (header['param_names'], header['head_kind']))

    params = OrderedDict()
    pos = _HEADER.size + n_bytes
    for name,shape in shapes.items():
        value, pos = decode_tensor(buf, pos)
        if value.shape != shape:
            raise FormatError("Parameter '%s' has shape %s, header implies %s"
                              % (name, value.shape, shape))
        params[name] = value
    if pos != len(buf):
        raise FormatError("Trailing bytes in model file '%s' (%d unread)" % (filename, len(buf)-pos))

    return ThreatModel(head_kind_name(header['head_kind']), frame_shape,
                       int(header['num_classes']), int(header['hidden_size']),
                       int(header['encoder_dim']), params, header.get('dataset_id',''))
