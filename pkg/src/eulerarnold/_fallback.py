"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

These sum the modes directly against a block of ``exp(i n theta)`` values
instead of running Horner's rule, so they double as an independent check of
the compiled path.
"""

import numpy as np

_BLOCK = 4096


def eval_real(cpos, theta):
    cpos = np.ascontiguousarray(cpos, dtype=np.complex128)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    K = cpos.shape[0] - 1
    values = np.empty(theta.shape[0])
    derivs = np.empty(theta.shape[0])
    if K < 0:
        values[:] = 0.0
        derivs[:] = 0.0
        return values, derivs
    n = np.arange(1, K + 1)
    c = cpos[1:]
    for start in range(0, theta.shape[0], _BLOCK):
        t = theta[start:start + _BLOCK]
        e = np.exp(1j * np.outer(t, n))
        values[start:start + _BLOCK] = cpos[0].real + 2.0 * (e @ c).real
        derivs[start:start + _BLOCK] = 2.0 * (e @ (1j * n * c)).real
    return values, derivs


def eval_complex(cpos, cneg, theta):
    cpos = np.ascontiguousarray(cpos, dtype=np.complex128)
    cneg = np.ascontiguousarray(cneg, dtype=np.complex128)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    n = np.concatenate([np.arange(cpos.shape[0]), -np.arange(1, cneg.shape[0] + 1)])
    c = np.concatenate([cpos, cneg])
    values = np.empty(theta.shape[0], dtype=np.complex128)
    derivs = np.empty(theta.shape[0], dtype=np.complex128)
    for start in range(0, theta.shape[0], _BLOCK):
        t = theta[start:start + _BLOCK]
        e = np.exp(1j * np.outer(t, n))
        values[start:start + _BLOCK] = e @ c
        derivs[start:start + _BLOCK] = e @ (1j * n * c)
    return values, derivs
