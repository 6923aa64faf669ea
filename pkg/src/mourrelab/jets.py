"""Truncated Taylor arithmetic ("jets") over numpy arrays.

A jet of degree ``K`` at points ``t`` is an array ``c`` of shape
``(K + 1,) + t.shape`` holding normalized Taylor coefficients
``c[k] = f^(k)(t) / k!``. Propagating jets through elementary operations
gives derivatives that are exact up to rounding, which is what the symbol
classes need for almost-analytic extensions of high Taylor order.
"""

from math import factorial

import numpy as np


def variable(t, K):
    """Jet of the identity map ``t -> t``."""
    t = np.asarray(t, dtype=float)
    c = np.zeros((K + 1,) + t.shape)
    c[0] = t
    if K >= 1:
        c[1] = 1.0
    return c


def constant(value, t, K):
    t = np.asarray(t, dtype=float)
    c = np.zeros((K + 1,) + t.shape)
    c[0] = value
    return c


def derivatives(c):
    """Convert Taylor coefficients to derivatives ``f^(k)``."""
    out = np.array(c, dtype=float, copy=True)
    for k in range(2, out.shape[0]):
        out[k] *= factorial(k)
    return out


def mul(a, b):
    K = a.shape[0] - 1
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(K + 1):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def div(a, b):
    K = a.shape[0] - 1
    q = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(K + 1):
        acc = a[k].copy() if np.ndim(a[k]) else a[k]
        for j in range(1, k + 1):
            acc = acc - b[j] * q[k - j]
        q[k] = acc / b[0]
    return q


def reciprocal(a):
    return div(constant(1.0, a[0], a.shape[0] - 1), a)


def exp(a):
    K = a.shape[0] - 1
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, K + 1):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc = acc + j * a[j] * e[k - j]
        e[k] = acc / k
    return e


def sqrt(a):
    """Square root; requires ``a[0] > 0`` wherever the result is used."""
    K = a.shape[0] - 1
    r = np.zeros_like(a)
    r[0] = np.sqrt(a[0])
    for k in range(1, K + 1):
        acc = a[k].copy()
        for j in range(1, k):
            acc = acc - r[j] * r[k - j]
        r[k] = acc / (2.0 * r[0])
    return r


def power(a, p):
    """``a ** p`` for real ``p``; requires ``a[0] > 0``."""
    K = a.shape[0] - 1
    y = np.zeros_like(a)
    y[0] = a[0] ** p
    for k in range(1, K + 1):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc = acc + ((p + 1.0) * j - k) * a[j] * y[k - j]
        y[k] = acc / (k * a[0])
    return y


def scale_argument(c, factor):
    """Jet of ``t -> f(factor * t)`` given the jet of ``f`` at ``factor * t``."""
    out = np.array(c, copy=True)
    for k in range(1, out.shape[0]):
        out[k] *= factor**k
    return out
