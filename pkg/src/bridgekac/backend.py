"""Dispatch between the compiled weight kernel and its numpy twin.

The compiled module is optional: installations without a C toolchain
fall back to the numpy implementation transparently.  Within one
installation results are bit-reproducible; across the two backends they
agree to a relative 1e-12 (summation order differs).
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py
from .potentials import QuadraticForm

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None
DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"

__all__ = [
    "DEFAULT_BACKEND",
    "HAVE_COMPILED",
    "available_backends",
    "quadratic_weights",
]


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if HAVE_COMPILED else ("python",)


def quadratic_weights(
    alpha: np.ndarray,
    x,
    y,
    t: float,
    form: QuadraticForm,
    backend: str | None = None,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Path weights exp(-trapezoid action) for a clipped quadratic potential.

    `alpha` has shape (n_paths, n_steps + 1, dim); `x` and `y` are the
    path endpoints.  `backend` is "compiled", "python", or None for the
    installation default.
    """
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled backend requested but the extension is not installed")

    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if alpha.ndim != 3:
        raise ValueError("alpha must have shape (n_paths, n_steps + 1, dim)")
    n_paths, n_nodes, dim = alpha.shape
    if n_nodes < 2:
        raise ValueError("paths need at least two grid nodes")
    if t <= 0.0:
        raise ValueError("t must be positive")
    # np.array: broadcast views are read-only, memoryviews need writable
    xv = np.array(np.broadcast_to(np.asarray(x, dtype=np.float64), (dim,)))
    yv = np.array(np.broadcast_to(np.asarray(y, dtype=np.float64), (dim,)))
    lin = np.array(np.asarray(form.lin, dtype=np.float64))
    if lin.shape != (dim,):
        raise ValueError("form.lin must match the path dimension")
    if out is None:
        out = np.empty(n_paths)

    if backend == "compiled":
        _compiled.quadratic_weights(
            alpha, xv, yv, float(t), form.quad, lin, form.const, form.floor, out
        )
        return out
    return _kernels_py.quadratic_weights(
        alpha, xv, yv, float(t), form.quad, lin, form.const, form.floor, out
    )
