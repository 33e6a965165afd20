# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the stencil kernels in :mod:`adaptive_sbp._pykernels`."""


cdef inline void _apply_q_block(const double[::1] w, const double[::1] u,
                                double[::1] out, Py_ssize_t n) noexcept nogil:
    cdef double q01 = w[0], q02 = w[1], q03 = w[2]
    cdef double q12 = w[3], q13 = w[4], q23 = w[5]
    cdef double r01 = w[6], r02 = w[7], r03 = w[8]
    cdef double r12 = w[9], r13 = w[10], r23 = w[11]
    cdef double a1 = w[12], a2 = w[13]
    cdef Py_ssize_t i

    for i in range(4, n - 3):
        out[i] = a1 * (u[i + 1] - u[i - 1]) + a2 * (u[i + 2] - u[i - 2])

    out[0] = -0.5 * u[0] + q01 * u[1] + q02 * u[2] + q03 * u[3]
    out[1] = -q01 * u[0] + q12 * u[2] + q13 * u[3]
    out[2] = -q02 * u[0] - q12 * u[1] + q23 * u[3] + a2 * u[4]
    out[3] = -q03 * u[0] - q13 * u[1] - q23 * u[2] + a1 * u[4] + a2 * u[5]

    out[n] = 0.5 * u[n] - r01 * u[n - 1] - r02 * u[n - 2] - r03 * u[n - 3]
    out[n - 1] = r01 * u[n] - r12 * u[n - 2] - r13 * u[n - 3]
    out[n - 2] = r02 * u[n] + r12 * u[n - 1] - r23 * u[n - 3] - a2 * u[n - 4]
    out[n - 3] = (r03 * u[n] + r13 * u[n - 1] + r23 * u[n - 2]
                  - a1 * u[n - 4] - a2 * u[n - 5])


def apply_q(const double[:, ::1] w, const double[:, ::1] u, double[:, ::1] out):
    cdef Py_ssize_t k, n = u.shape[1] - 1
    with nogil:
        for k in range(u.shape[0]):
            _apply_q_block(w[k], u[k], out[k], n)
    return out.base if out.base is not None else out


def sat_rhs(const double[:, ::1] w, const double[:, ::1] pinv,
            const double[:, ::1] u, double theta, double[:, ::1] out):
    cdef Py_ssize_t k, i, kk = u.shape[0], n = u.shape[1] - 1
    cdef Py_ssize_t prev, nxt
    cdef double cl = 0.5 * (1.0 + theta), cr = 0.5 * (1.0 - theta)
    with nogil:
        for k in range(kk):
            _apply_q_block(w[k], u[k], out[k], n)
            for i in range(n + 1):
                out[k, i] = -pinv[k, i] * out[k, i]
            prev = k - 1 if k > 0 else kk - 1
            nxt = k + 1 if k < kk - 1 else 0
            out[k, 0] -= cl * pinv[k, 0] * (u[k, 0] - u[prev, n])
            out[k, n] += cr * pinv[k, n] * (u[k, n] - u[nxt, 0])
    return out.base if out.base is not None else out


def design_matrix(const double[::1] u, double[:, ::1] a):
    cdef Py_ssize_t i, j, n = u.shape[0] - 1
    cdef int p, q
    cdef int[6] ps = [0, 0, 0, 1, 1, 2]
    cdef int[6] qs = [1, 2, 3, 2, 3, 3]
    with nogil:
        for i in range(n + 1):
            for j in range(14):
                a[i, j] = 0.0
        for j in range(6):
            p = ps[j]
            q = qs[j]
            a[p, j] += u[q]
            a[q, j] -= u[p]
            a[n - q, 6 + j] += u[n - p]
            a[n - p, 6 + j] -= u[n - q]
        for i in range(3, n - 3):
            a[i, 12] += u[i + 1]
            a[i + 1, 12] -= u[i]
        for i in range(2, n - 3):
            a[i, 13] += u[i + 2]
            a[i + 2, 13] -= u[i]
    return a.base if a.base is not None else a
