# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled load-coupling kernels.  Mirrors ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2, fabs, isfinite, INFINITY

cnp.import_array()

cdef enum:
    _CONVERGED = 0
    _DIVERGED = 1
    _ITERATION_CAP = 2
    _EXCEEDED = 3

STATUS_CONVERGED = _CONVERGED
STATUS_DIVERGED = _DIVERGED
STATUS_ITERATION_CAP = _ITERATION_CAP
STATUS_EXCEEDED = _EXCEEDED

BACKEND = "cython"


cdef void _ue_loads(const double[:, ::1] A, const unsigned char[:, ::1] kappa,
                    const double[::1] dscaled, double noise, const double[::1] x,
                    double[::1] y) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j
    cdef double sig, itf, a
    for j in range(m):
        sig = 0.0
        itf = noise
        for i in range(n):
            a = A[i, j]
            if kappa[i, j]:
                sig += a
            else:
                itf += a * x[i]
        y[j] = dscaled[j] / log2(1.0 + sig / itf)


cdef void _cell_loads(const unsigned char[:, ::1] kappa, const double[::1] y,
                      double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = kappa.shape[0], m = kappa.shape[1], i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(m):
            if kappa[i, j]:
                s += y[j]
        out[i] = s


def sinr(const double[:, ::1] A, const unsigned char[:, ::1] kappa, double noise,
         const double[::1] x):
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j
    cdef double sig, itf
    gamma = np.empty(m, dtype=np.float64)
    cdef double[::1] g = gamma
    for j in range(m):
        sig = 0.0
        itf = noise
        for i in range(n):
            if kappa[i, j]:
                sig += A[i, j]
            else:
                itf += A[i, j] * x[i]
        g[j] = sig / itf
    return gamma


def load_map(const double[:, ::1] A, const unsigned char[:, ::1] kappa,
             const double[::1] dscaled, double noise, const double[::1] x):
    out = np.empty(A.shape[0], dtype=np.float64)
    y = np.empty(A.shape[1], dtype=np.float64)
    cdef double[::1] o = out, yv = y
    with nogil:
        _ue_loads(A, kappa, dscaled, noise, x, yv)
        _cell_loads(kappa, yv, o)
    return out


cdef void _split(const double[:, ::1] A, const unsigned char[:, ::1] kappa,
                 double[::1] signal, double[:, ::1] interf_t) noexcept nogil:
    # per-UE serving power and a UE-major interference matrix, so each
    # iteration reads contiguous rows instead of striding down columns
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j
    for j in range(m):
        signal[j] = 0.0
    for i in range(n):
        for j in range(m):
            if kappa[i, j]:
                signal[j] += A[i, j]
                interf_t[j, i] = 0.0
            else:
                interf_t[j, i] = A[i, j]


cdef void _ue_loads_split(const double[::1] signal, const double[:, ::1] interf_t,
                          const double[::1] dscaled, double noise, const double[::1] x,
                          double[::1] y) noexcept nogil:
    cdef Py_ssize_t m = interf_t.shape[0], n = interf_t.shape[1], i, j
    cdef double itf
    for j in range(m):
        itf = noise
        for i in range(n):
            itf += interf_t[j, i] * x[i]
        y[j] = dscaled[j] / log2(1.0 + signal[j] / itf)


def fixed_point(const double[:, ::1] A, const unsigned char[:, ::1] kappa,
                const double[::1] dscaled, double noise, x0, double tol,
                long max_iter, double ceiling, double stop_above):
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i
    x_arr = np.array(x0, dtype=np.float64)
    xn_arr = np.empty(n, dtype=np.float64)
    y_arr = np.empty(m, dtype=np.float64)
    sig_arr = np.empty(m, dtype=np.float64)
    itf_arr = np.empty((m, n), dtype=np.float64)
    cdef double[::1] x = x_arr, xn = xn_arr, y = y_arr, sig = sig_arr, tmp
    cdef double[:, ::1] itf = itf_arr
    cdef long it
    cdef double residual = INFINITY, top, d
    cdef bint increasing = False
    cdef int status = _ITERATION_CAP
    cdef long used = max_iter
    with nogil:
        _split(A, kappa, sig, itf)
        for it in range(1, max_iter + 1):
            _ue_loads_split(sig, itf, dscaled, noise, x, y)
            _cell_loads(kappa, y, xn)
            residual = 0.0
            top = 0.0
            if it == 1:
                increasing = True
                for i in range(n):
                    if xn[i] < x[i]:
                        increasing = False
            for i in range(n):
                d = fabs(xn[i] - x[i])
                if d > residual or not isfinite(d):
                    residual = d
                if xn[i] > top or not isfinite(xn[i]):
                    top = xn[i]
            tmp = x
            x = xn
            xn = tmp
            if not isfinite(top) or top > ceiling:
                status = _DIVERGED
                used = it
                break
            if residual <= tol:
                status = _CONVERGED
                used = it
                break
            if stop_above > 0.0 and increasing and top > stop_above:
                status = _EXCEEDED
                used = it
                break
    return np.asarray(x).copy(), int(used), int(status), float(residual)


def link_probe(const double[:, ::1] A, const unsigned char[:, ::1] kappa,
               const double[::1] dscaled, double noise, x0, Py_ssize_t c,
               Py_ssize_t u, long tau):
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], j
    kplus_arr = np.array(kappa, dtype=np.uint8)
    kplus_arr[c, u] = 1
    cdef const unsigned char[:, ::1] kplus = kplus_arr
    x_arr = np.array(x0, dtype=np.float64)
    y_arr = np.empty(m, dtype=np.float64)
    sig_arr = np.empty(m, dtype=np.float64)
    itf_arr = np.empty((m, n), dtype=np.float64)
    cdef double[::1] x = x_arr, y = y_arr, sig = sig_arr
    cdef double[:, ::1] itf = itf_arr
    cdef long k
    cdef double fc
    cdef long accepted = 0
    with nogil:
        _split(A, kplus, sig, itf)
        for k in range(1, tau + 1):
            _ue_loads_split(sig, itf, dscaled, noise, x, y)
            _cell_loads(kappa, y, x)
            _ue_loads_split(sig, itf, dscaled, noise, x, y)
            fc = 0.0
            for j in range(m):
                if kplus[c, j]:
                    fc += y[j]
            if fc <= x[c]:
                accepted = k
                break
    return int(accepted), x_arr
