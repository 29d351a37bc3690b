# -*- coding: utf-8 -*-
"""
Finite-difference checks of tape gradients

Function list
-------------
- numerical_gradient :  Central-difference gradient of a scalar function of an array
- max_relative_error :  Max abs difference between gradients, relative to their largest magnitude
- check_gradient :      Compare tape and finite-difference gradients of a Tensor function

Function reference
------------------
"""
import numpy as np

from spavid.tensor.tensor import Tensor, reset_tape


def numerical_gradient(fn, x, h=1e-4):
    """
    Central-difference gradient of a scalar function of an array

    Parameters
    ----------
    fn : callable
        Function mapping an ndarray with the shape of `x` to a float

    x : array-like
        Point at which to evaluate the gradient. Not altered.

    h : float, default: 1e-4
        Finite-difference step

    Returns
    -------
    grad : ndarray, shape=x.shape
        Estimated gradient (f(x+h) - f(x-h)) / 2h for each entry of x
    """
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)

    for idx in np.ndindex(*x.shape):
        orig = x[idx]
        x[idx] = orig + h
        f_plus = float(fn(x))
        x[idx] = orig - h
        f_minus = float(fn(x))
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0*h)

    return grad


def max_relative_error(analytic, numeric, floor=1e-12):
    """
    Max absolute difference between two gradients, relative to their largest magnitude

    rel_err = max|a - n| / max(max|a|, max|n|, floor)
    """
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(np.abs(analytic).max(initial=0), np.abs(numeric).max(initial=0), floor)
    return float(np.abs(analytic - numeric).max(initial=0) / scale)


def check_gradient(fn, x, h=1e-4):
    """
    Compare tape gradient against central finite differences for a function of one Tensor

    Parameters
    ----------
    fn : callable
        Function mapping a Tensor to a single-element Tensor

    x : array-like
        Point at which to compare gradients

    h : float, default: 1e-4
        Finite-difference step

    Returns
    -------
    rel_err : float
        Max relative error between gradients (see :func:`max_relative_error`)

    analytic : ndarray, shape=x.shape
        Gradient from backward pass

    numeric : ndarray, shape=x.shape
        Finite-difference gradient
    """
    x_tensor = Tensor(x, requires_grad=True)
    fn(x_tensor).backward()
    analytic = x_tensor.grad if x_tensor.grad is not None else np.zeros(x_tensor.shape)

    numeric = numerical_gradient(lambda value: fn(Tensor(value)).item(), x, h=h)
    # Drop anything recorded by untracked-input evaluations that still touch tracked tensors
    reset_tape()

    return max_relative_error(analytic, numeric), analytic, numeric
