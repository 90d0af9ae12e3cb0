# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the path-weight kernel.

Semantics match `_kernels_py.quadratic_weights`; see that module for
the contract.  The loop releases the GIL so Python-level worker threads
parallelize across path chunks.
"""

from libc.math cimport exp, fmax, sqrt

BACKEND_NAME = "compiled"


def quadratic_weights(
    double[:, :, ::1] alpha,
    double[::1] x,
    double[::1] y,
    double t,
    double quad,
    double[::1] lin,
    double const_term,
    double floor,
    double[::1] out,
):
    cdef Py_ssize_t n_paths = alpha.shape[0]
    cdef Py_ssize_t n_nodes = alpha.shape[1]
    cdef Py_ssize_t dim = alpha.shape[2]
    cdef Py_ssize_t n_steps = n_nodes - 1
    cdef double rt = sqrt(t)
    cdef double scale = t / n_steps
    cdef Py_ssize_t i, k, d
    cdef double u, p, s2, sl, v, acc
    with nogil:
        for i in range(n_paths):
            acc = 0.0
            for k in range(n_nodes):
                u = <double> k / <double> n_steps
                s2 = 0.0
                sl = 0.0
                for d in range(dim):
                    p = (1.0 - u) * x[d] + u * y[d] + rt * alpha[i, k, d]
                    s2 += p * p
                    sl += lin[d] * p
                v = fmax(quad * s2 + sl + const_term, floor)
                if k == 0 or k == n_steps:
                    v *= 0.5
                acc += v
            out[i] = exp(-acc * scale)
    return None
