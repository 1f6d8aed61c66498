# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the NumPy hot kernels.

Same contract as :mod:`smartcpd._kernels_py`: 0-based indices, float64
C-contiguous arrays, shared loss/generator codes.  The fused loops avoid
the temporaries and per-call overhead that dominate at small fiber batches.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, pow, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND_NAME = "c"

LOSS_EUCLIDEAN = 0
LOSS_IS = 1
LOSS_BETA = 2
LOSS_GEN_KL = 3
LOSS_POISSON_EXP = 4
LOSS_BERN_ODDS = 5
LOSS_LOGISTIC = 6

DEF EXP_CAP = 700.0


cdef inline double _capped_exp(double v) noexcept nogil:
    if v > EXP_CAP:
        v = EXP_CAP
    elif v < -EXP_CAP:
        v = -EXP_CAP
    return exp(v)


cdef inline double _sigmoid(double m) noexcept nogil:
    cdef double e
    if m >= 0.0:
        return 1.0 / (1.0 + exp(-m))
    e = exp(m)
    return e / (1.0 + e)


cdef void _dloss_row(int loss_id, double beta, double eps,
                     const double* x, const double* m, double* d,
                     Py_ssize_t n) noexcept nogil:
    # branch once per row so each loop auto-vectorizes (divisions included)
    cdef Py_ssize_t i
    if loss_id == 0:
        for i in range(n):
            d[i] = m[i] - x[i]
    elif loss_id == 1:
        for i in range(n):
            d[i] = (m[i] - x[i] + eps) / ((m[i] + eps) * (m[i] + eps))
    elif loss_id == 2:
        for i in range(n):
            d[i] = pow(m[i] + eps, beta - 2.0) * (m[i] - x[i] + eps)
    elif loss_id == 3:
        for i in range(n):
            d[i] = 1.0 - x[i] / (m[i] + eps)
    elif loss_id == 4:
        for i in range(n):
            d[i] = exp(m[i]) - x[i]
    elif loss_id == 5:
        for i in range(n):
            d[i] = 1.0 / (m[i] + 1.0) - x[i] / (m[i] + eps)
    else:
        for i in range(n):
            d[i] = _sigmoid(m[i]) - x[i]


cdef inline double _dloss(int loss_id, double beta, double eps,
                          double x, double m) noexcept nogil:
    if loss_id == 0:  # euclidean
        return m - x
    if loss_id == 1:  # is
        return (m - x + eps) / ((m + eps) * (m + eps))
    if loss_id == 2:  # beta
        return pow(m + eps, beta - 2.0) * (m - x + eps)
    if loss_id == 3:  # gen-kl
        return 1.0 - x / (m + eps)
    if loss_id == 4:  # poisson exp link
        return exp(m) - x
    if loss_id == 5:  # bernoulli odds
        return 1.0 / (m + 1.0) - x / (m + eps)
    return _sigmoid(m) - x  # logistic


def kr_rows(list factors, Py_ssize_t n0, const cnp.int64_t[::1] fibers0):
    cdef Py_ssize_t n_modes = len(factors)
    cdef Py_ssize_t nfib = fibers0.shape[0]
    cdef cnp.ndarray arr = <cnp.ndarray> factors[0]
    cdef Py_ssize_t rank = cnp.PyArray_DIM(arr, 1)
    cdef double** ptrs = <double**> malloc(n_modes * sizeof(double*))
    cdef cnp.int64_t* dims = <cnp.int64_t*> malloc(n_modes * sizeof(cnp.int64_t))
    cdef Py_ssize_t m, bi, r
    cdef cnp.int64_t rem, d
    cdef double* row
    out = np.empty((nfib, rank), dtype=np.float64)
    cdef double[:, ::1] o = out
    try:
        for m in range(n_modes):
            arr = <cnp.ndarray> factors[m]
            ptrs[m] = <double*> cnp.PyArray_DATA(arr)
            dims[m] = cnp.PyArray_DIM(arr, 0)
        with nogil:
            for bi in range(nfib):
                for r in range(rank):
                    o[bi, r] = 1.0
                rem = fibers0[bi]
                for m in range(n_modes):
                    if m == n0:
                        continue
                    d = rem % dims[m]
                    rem //= dims[m]
                    row = ptrs[m] + d * rank
                    for r in range(rank):
                        o[bi, r] *= row[r]
    finally:
        free(ptrs)
        free(dims)
    return out


def dense_fiber_rows(const double[::1] values, const cnp.int64_t[::1] shape,
                     Py_ssize_t n0, const cnp.int64_t[::1] fibers0):
    cdef Py_ssize_t n_modes = shape.shape[0]
    cdef Py_ssize_t nfib = fibers0.shape[0]
    cdef Py_ssize_t icur = shape[n0]
    cdef cnp.int64_t* strides = <cnp.int64_t*> malloc(n_modes * sizeof(cnp.int64_t))
    cdef Py_ssize_t k, bi, i
    cdef cnp.int64_t rem, d, base, step
    out = np.empty((nfib, icur), dtype=np.float64)
    cdef double[:, ::1] o = out
    try:
        strides[0] = 1
        for k in range(1, n_modes):
            strides[k] = strides[k - 1] * shape[k - 1]
        step = strides[n0]
        with nogil:
            for bi in range(nfib):
                rem = fibers0[bi]
                base = 0
                for k in range(n_modes):
                    if k == n0:
                        continue
                    d = rem % shape[k]
                    rem //= shape[k]
                    base += d * strides[k]
                for i in range(icur):
                    o[bi, i] = values[base + i * step]
    finally:
        free(strides)
    return out


def grad_rows(int loss_id, double beta, double eps,
              const double[:, ::1] xhat, const double[:, ::1] hhat, const double[:, ::1] a):
    cdef Py_ssize_t nfib = xhat.shape[0]
    cdef Py_ssize_t icur = xhat.shape[1]
    cdef Py_ssize_t rank = hhat.shape[1]
    cdef Py_ssize_t j, i, r
    cdef double hv, scale
    cdef const double* hrow
    cdef const double* xrow
    cdef double* at = <double*> malloc(rank * icur * sizeof(double))
    cdef double* gt = <double*> malloc(rank * icur * sizeof(double))
    cdef double* mrow = <double*> malloc(icur * sizeof(double))
    cdef double* drow = <double*> malloc(icur * sizeof(double))
    out = np.empty((icur, rank), dtype=np.float64)
    cdef double[:, ::1] g = out
    if at == NULL or gt == NULL or mrow == NULL or drow == NULL:
        free(at); free(gt); free(mrow); free(drow)
        raise MemoryError
    try:
        with nogil:
            # transposed copies make every inner loop contiguous over i
            for i in range(icur):
                for r in range(rank):
                    at[r * icur + i] = a[i, r]
            for r in range(rank * icur):
                gt[r] = 0.0
            for j in range(nfib):
                hrow = &hhat[j, 0]
                xrow = &xhat[j, 0]
                for i in range(icur):
                    mrow[i] = 0.0
                for r in range(rank):
                    hv = hrow[r]
                    for i in range(icur):
                        mrow[i] += hv * at[r * icur + i]
                _dloss_row(loss_id, beta, eps, xrow, mrow, drow, icur)
                for r in range(rank):
                    hv = hrow[r]
                    for i in range(icur):
                        gt[r * icur + i] += hv * drow[i]
            scale = 1.0 / (nfib * icur)
            for i in range(icur):
                for r in range(rank):
                    g[i, r] = gt[r * icur + i] * scale
    finally:
        free(at); free(gt); free(mrow); free(drow)
    return out


def adagrad_step(double[:, ::1] acc, const double[:, ::1] g, double b):
    cdef Py_ssize_t rows = acc.shape[0]
    cdef Py_ssize_t cols = acc.shape[1]
    cdef Py_ssize_t i, r
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] gamma = out
    with nogil:
        for i in range(rows):
            for r in range(cols):
                acc[i, r] += g[i, r] * g[i, r]
                gamma[i, r] = sqrt(acc[i, r] + b)
    return out


def jensen_gamma(int loss_id, double beta, const double[:, ::1] xhat,
                 const double[:, ::1] hhat, const double[:, ::1] a, double gamma_min):
    cdef Py_ssize_t nfib = xhat.shape[0]
    cdef Py_ssize_t icur = xhat.shape[1]
    cdef Py_ssize_t rank = hhat.shape[1]
    cdef Py_ssize_t j, i, r
    cdef double hv, pref, av, v
    cdef bint bad = 0
    cdef const double* hrow
    cdef const double* xrow
    cdef double* at = <double*> malloc(rank * icur * sizeof(double))
    cdef double* gt = <double*> malloc(rank * icur * sizeof(double))
    cdef double* mrow = <double*> malloc(icur * sizeof(double))
    cdef double* wrow = <double*> malloc(icur * sizeof(double))
    out = np.empty((icur, rank), dtype=np.float64)
    cdef double[:, ::1] gamma = out
    if at == NULL or gt == NULL or mrow == NULL or wrow == NULL:
        free(at); free(gt); free(mrow); free(wrow)
        raise MemoryError
    try:
        with nogil:
            for i in range(icur):
                for r in range(rank):
                    at[r * icur + i] = a[i, r]
            for r in range(rank * icur):
                gt[r] = 0.0
            for j in range(nfib):
                if bad:
                    break
                hrow = &hhat[j, 0]
                xrow = &xhat[j, 0]
                for i in range(icur):
                    mrow[i] = 0.0
                for r in range(rank):
                    hv = hrow[r]
                    for i in range(icur):
                        mrow[i] += hv * at[r * icur + i]
                for i in range(icur):
                    if mrow[i] <= 0.0:
                        bad = 1
                        break
                if bad:
                    break
                if loss_id == 0:
                    for i in range(icur):
                        wrow[i] = mrow[i]
                elif loss_id == 1:
                    for i in range(icur):
                        wrow[i] = xrow[i] / (mrow[i] * mrow[i])
                elif loss_id == 3 or loss_id == 5:
                    for i in range(icur):
                        wrow[i] = xrow[i] / mrow[i]
                elif beta > 1.0:
                    for i in range(icur):
                        wrow[i] = pow(mrow[i], beta - 1.0)
                else:
                    for i in range(icur):
                        wrow[i] = xrow[i] * pow(mrow[i], beta - 2.0)
                for r in range(rank):
                    hv = hrow[r]
                    for i in range(icur):
                        gt[r * icur + i] += hv * wrow[i]
            if not bad:
                pref = 1.0 / (nfib * icur)
                if loss_id == 2:
                    pref = pref / beta if beta > 1.0 else pref / (1.0 - beta)
                for i in range(icur):
                    for r in range(rank):
                        av = a[i, r]
                        v = gt[r * icur + i]
                        if loss_id == 0:
                            v *= pref / av
                        elif loss_id == 1:
                            v *= pref * av * av
                        elif loss_id == 3 or loss_id == 5:
                            v *= pref * av
                        elif beta > 1.0:
                            v *= pref * pow(av, 1.0 - beta)
                        else:
                            v *= pref * pow(av, 2.0 - beta)
                        gamma[i, r] = v if v > gamma_min else gamma_min
    finally:
        free(at); free(gt); free(mrow); free(wrow)
    if bad:
        return None
    return out


def update_entropy(const double[:, ::1] a, const double[:, ::1] g, const double[:, ::1] gamma,
                   double floor):
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t i, r
    cdef double v
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(rows):
            for r in range(cols):
                v = a[i, r] * _capped_exp(-g[i, r] / gamma[i, r])
                o[i, r] = v if v > floor else floor
    return out


def update_entropy_simplex(const double[:, ::1] a, const double[:, ::1] g,
                           const double[:, ::1] gamma, double floor):
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t i, r
    cdef double v, s
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for r in range(cols):
            s = 0.0
            for i in range(rows):
                v = a[i, r] * _capped_exp(-g[i, r] / gamma[i, r])
                if v < floor:
                    v = floor
                o[i, r] = v
                s += v
            for i in range(rows):
                o[i, r] /= s
    return out


def update_neglog(const double[:, ::1] a, const double[:, ::1] g, const double[:, ::1] gamma,
                  double floor):
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t i, r
    cdef double denom, v
    cdef bint bad = 0
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(rows):
            if bad:
                break
            for r in range(cols):
                denom = 1.0 + g[i, r] * a[i, r] / gamma[i, r]
                if denom <= 0.0:
                    bad = 1
                    break
                v = a[i, r] / denom
                o[i, r] = v if v > floor else floor
    if bad:
        return False, None
    return True, out


def update_power(const double[:, ::1] a, const double[:, ::1] g, const double[:, ::1] gamma,
                 double c, double floor):
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t i, r
    cdef double base, v, expo = 1.0 / (c - 1.0)
    cdef bint bad = 0
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(rows):
            if bad:
                break
            for r in range(cols):
                base = pow(a[i, r], c - 1.0) - g[i, r] / (c * gamma[i, r])
                if base <= 0.0:
                    bad = 1
                    break
                v = pow(base, expo)
                o[i, r] = v if v > floor else floor
    if bad:
        return False, None
    return True, out


def update_quadratic(const double[:, ::1] a, const double[:, ::1] g, const double[:, ::1] gamma,
                     bint nonneg):
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t i, r
    cdef double v
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(rows):
            for r in range(cols):
                v = a[i, r] - g[i, r] / gamma[i, r]
                if nonneg and v < 0.0:
                    v = 0.0
                o[i, r] = v
    return out
