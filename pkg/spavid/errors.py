# -*- coding: utf-8 -*-
"""
Exception types raised by spavid

All exceptions derive from :class:`SpavidError`, and also from the built-in exception
a caller would naturally catch for that kind of failure (ValueError for bad shapes or
file contents, RuntimeError for bad program state), so code written against plain Python
exceptions keeps working.

Exception list
--------------
- SpavidError :             Base class for all spavid errors
- ShapeError :              Tensor shapes/extents/ranks incompatible with an operation
- TapeError :               Invalid use of a computation tape (consumed tape, bad root)
- FormatError :             Malformed VTEN file or model container
- UnsupportedVersionError : VTEN file with a version other than 1
- DivergenceError :         Training loss became NaN/Inf
- AttackError :             Attack precondition not met
- ConfigError :             Invalid experiment configuration or missing artifacts
"""


class SpavidError(Exception):
    """ Base class for all spavid exceptions """


class ShapeError(SpavidError, ValueError):
    """
    Raised when tensor shapes are incompatible with an operation

    Parameters
    ----------
    message : str
        Description of the failed operation

    shapes : tuple of tuple, optional
        Offending shapes. Appended to the message so both operands are always named.
    """
    def __init__(self, message, *shapes):
        if len(shapes) > 0:
            message = "%s (shapes: %s)" % (message, ' vs '.join(str(tuple(s)) for s in shapes))
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class TapeError(SpavidError, RuntimeError):
    """ Raised on invalid use of a computation tape """


class FormatError(SpavidError, ValueError):
    """ Raised when a VTEN file or model container is malformed """


class UnsupportedVersionError(FormatError):
    """ Raised when a VTEN file declares a version this library cannot read """


class DivergenceError(SpavidError, RuntimeError):
    """ Raised when model training produces a non-finite loss """


class AttackError(SpavidError, ValueError):
    """ Raised when an attack's preconditions are not met """


class ConfigError(SpavidError, ValueError):
    """ Raised when an experiment configuration is invalid or references missing artifacts """
