# -*- coding: utf-8 -*-
"""
Reading and writing tensors in the "VTEN v1" binary format

Layout (all multi-byte integers little-endian)::

    bytes 0-3   magic b'VTEN'
    byte  4     u8 version (= 1)
    byte  5     u8 rank
    ...         rank x u32 extents
    ...         prod(extents) x float32 values, row-major

The same block encoding is used for videos, perturbations, and (concatenated, after a
header block) model weights. Values are stored as float32, so arrays whose values are
float32-representable round-trip bit-exactly.

Function list
-------------
- encode_tensor :   Encode array -> VTEN bytes
- decode_tensor :   Decode one VTEN block from a byte buffer (at given offset)
- save_tensor :     Write array to a VTEN file
- load_tensor :     Read array from a VTEN file, optionally checking its rank

Function reference
------------------
"""
import os
import struct
import numpy as np

from spavid.errors import FormatError, UnsupportedVersionError, ShapeError

MAGIC = b'VTEN'
VERSION = 1
MAX_RANK = 4
MAX_ELEMENTS = 2**31 - 1

_PREAMBLE = struct.Struct('<4sBB')


def encode_tensor(data):
    """
    Encode an array as a VTEN v1 byte string

    Parameters
    ----------
    data : array-like or Tensor, rank <= 4
        Values to encode. Stored as little-endian float32.

    Returns
    -------
    buf : bytes
    """
    data = np.asarray(getattr(data, 'data', data), dtype=np.float64)
    if data.ndim > MAX_RANK:
        raise ShapeError("VTEN tensors must have rank <= %d" % MAX_RANK, data.shape)
    if any(n >= 2**32 for n in data.shape):
        raise ShapeError("VTEN extents must fit in u32", data.shape)

    extents = np.asarray(data.shape, dtype='<u4').tobytes()
    values = np.ascontiguousarray(data, dtype='<f4').tobytes()
    return _PREAMBLE.pack(MAGIC, VERSION, data.ndim) + extents + values


def decode_tensor(buf, offset=0):
    """
    Decode one VTEN block from a byte buffer

    Parameters
    ----------
    buf : bytes
        Buffer holding one or more VTEN blocks

    offset : int, default: 0
        Byte position of the block's magic

    Returns
    -------
    data : ndarray, dtype=float64
        Decoded values, shape given by the block's extents

    end : int
        Byte position just past the decoded block

    Raises
    ------
    FormatError
        Bad magic, truncated buffer, rank > 4, or element count overflow
    UnsupportedVersionError
        Version byte other than 1
    """
    if len(buf) - offset < _PREAMBLE.size:
        raise FormatError("Truncated VTEN data: %d bytes at offset %d, need >= %d for header"
                          % (len(buf)-offset, offset, _PREAMBLE.size))

    magic, version, rank = _PREAMBLE.unpack_from(buf, offset)
    if magic != MAGIC:
        raise FormatError("Bad VTEN magic %r (expected %r)" % (magic, MAGIC))
    if version != VERSION:
        raise UnsupportedVersionError("Unsupported VTEN version %d (only version %d is supported)"
                                      % (version, VERSION))
    if rank > MAX_RANK:
        raise FormatError("VTEN rank %d exceeds maximum rank %d" % (rank, MAX_RANK))

    pos = offset + _PREAMBLE.size
    if len(buf) - pos < 4*rank:
        raise FormatError("Truncated VTEN data: missing extents for rank %d" % rank)
    shape = tuple(int(n) for n in np.frombuffer(buf, dtype='<u4', count=rank, offset=pos)) \
            if rank > 0 else ()
    pos += 4*rank

    count = int(np.prod(shape, dtype=object)) if rank > 0 else 1
    if count > MAX_ELEMENTS:
        raise FormatError("VTEN extent overflow: %s holds %d elements" % (shape, count))
    if len(buf) - pos < 4*count:
        raise FormatError("Truncated VTEN data: extents %s need %d bytes of values, found %d"
                          % (shape, 4*count, len(buf)-pos))

    if count == 0: return np.zeros(shape), pos
    data = np.frombuffer(buf, dtype='<f4', count=count, offset=pos).astype(np.float64)
    return data.reshape(shape), pos + 4*count


def save_tensor(filename, data):
    """
    Write an array to a VTEN v1 file

    Parameters
    ----------
    filename : str
        Full-path name of file to write. Parent directory is created if needed.

    data : array-like or Tensor, rank <= 4
        Values to save
    """
    dirname = os.path.dirname(filename)
    if dirname: os.makedirs(dirname, exist_ok=True)
    with open(filename, 'wb') as f:
        f.write(encode_tensor(data))


def load_tensor(filename, rank=None):
    """
    Read an array from a VTEN v1 file

    Parameters
    ----------
    filename : str
        Full-path name of file to read

    rank : int, default: None (accept any rank)
        Expected rank. A file of a different rank raises FormatError naming both ranks.

    Returns
    -------
    data : ndarray, dtype=float64
    """
    with open(filename, 'rb') as f:
        buf = f.read()

    data, end = decode_tensor(buf)
    if end != len(buf):
        raise FormatError("Trailing bytes in VTEN file '%s' (%d unread)" % (filename, len(buf)-end))
    if (rank is not None) and (data.ndim != rank):
        raise FormatError("VTEN file '%s' has rank %d, expected rank %d"
                          % (filename, data.ndim, rank))
    return data
