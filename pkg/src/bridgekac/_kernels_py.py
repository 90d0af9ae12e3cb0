"""Numpy implementation of the path-weight kernel.

Mirrors the compiled extension in `_kernels.pyx`: given a batch of
bridge paths, both evaluate the trapezoid action of a clipped quadratic
potential along the interpolated pin-to-pin path and return the
exponential weights exp(-action).  The two implementations agree to a
relative 1e-12 (summation order differs), and each is bit-deterministic
on its own.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def quadratic_weights(
    alpha: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    t: float,
    quad: float,
    lin: np.ndarray,
    const: float,
    floor: float,
    out: np.ndarray,
) -> np.ndarray:
    """Weights exp(-t * trapezoid(V(path))) for V = max(q|z|^2 + g.z + c, floor).

    `alpha` has shape (n_paths, n_steps + 1, dim); the path through
    position u is (1-u) x + u y + sqrt(t) alpha(u).
    """
    n_steps = alpha.shape[1] - 1
    u = np.arange(alpha.shape[1], dtype=np.float64) / n_steps
    base = np.outer(1.0 - u, x) + np.outer(u, y)
    pos = base[None, :, :] + np.sqrt(t) * alpha
    v = quad * np.square(pos).sum(axis=-1)
    v += pos @ lin
    v += const
    np.maximum(v, floor, out=v)
    v[:, 0] *= 0.5
    v[:, -1] *= 0.5
    action = v.sum(axis=1)
    action *= -(t / n_steps)
    return np.exp(action, out=out)
