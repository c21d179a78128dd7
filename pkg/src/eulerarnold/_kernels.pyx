# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Horner kernels for off-grid trigonometric polynomial evaluation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def eval_real(const double complex[::1] cpos, const double[::1] theta):
    """Evaluate ``c0 + 2 Re sum_{k>=1} c_k e^{ik theta}`` and its theta-derivative.

    ``cpos[k]`` holds the coefficient of mode ``k`` for ``k = 0..K``.
    """
    cdef Py_ssize_t npts = theta.shape[0]
    cdef Py_ssize_t K = cpos.shape[0] - 1
    cdef Py_ssize_t j, k
    cdef double complex z, p, dp
    cdef double t
    values = np.empty(npts, dtype=np.float64)
    derivs = np.empty(npts, dtype=np.float64)
    cdef double[::1] v = values
    cdef double[::1] d = derivs
    if K < 0:
        values[:] = 0.0
        derivs[:] = 0.0
        return values, derivs
    for j in range(npts):
        t = theta[j]
        z = cos(t) + 1j * sin(t)
        p = cpos[K]
        dp = 0.0
        for k in range(K - 1, 0, -1):
            dp = dp * z + p
            p = p * z + cpos[k]
        # p is now sum_{k>=1} c_k z^{k-1}; dp its z-derivative
        if K >= 1:
            dp = dp * z + p
            p = p * z
        else:
            p = 0.0
            dp = 0.0
        v[j] = cpos[0].real + 2.0 * p.real
        # d/dtheta of 2 Re P(z) = 2 Re(i z P'(z))
        d[j] = -2.0 * (z * dp).imag
    return values, derivs


def eval_complex(const double complex[::1] cpos, const double complex[::1] cneg,
                 const double[::1] theta):
    """Evaluate ``sum_{n=-K..K} c_n e^{in theta}`` and its theta-derivative.

    ``cpos[k] = c_k`` for ``k >= 0`` and ``cneg[k] = c_{-(k+1)}``.
    """
    cdef Py_ssize_t npts = theta.shape[0]
    cdef Py_ssize_t kp = cpos.shape[0]
    cdef Py_ssize_t kn = cneg.shape[0]
    cdef Py_ssize_t j, k
    cdef double complex z, w, p, dp, q, dq
    cdef double t
    values = np.empty(npts, dtype=np.complex128)
    derivs = np.empty(npts, dtype=np.complex128)
    cdef double complex[::1] v = values
    cdef double complex[::1] d = derivs
    for j in range(npts):
        t = theta[j]
        z = cos(t) + 1j * sin(t)
        w = z.conjugate()
        p = 0.0
        dp = 0.0
        for k in range(kp - 1, -1, -1):
            dp = dp * z + p
            p = p * z + cpos[k]
        # Q(w) = sum_{k>=1} cneg[k-1] w^k = w * R(w)
        q = 0.0
        dq = 0.0
        for k in range(kn - 1, -1, -1):
            dq = dq * w + q
            q = q * w + cneg[k]
        # Q = w R, Q' = R + w R'
        dq = q + w * dq
        q = w * q
        v[j] = p + q
        d[j] = 1j * z * dp - 1j * w * dq
    return values, derivs
