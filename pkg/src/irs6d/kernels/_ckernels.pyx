# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the correlation-grid and rank-1 ALS kernels.

Same signatures and results as :mod:`irs6d.kernels._pykernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, M_PI, fabs

cnp.import_array()

ctypedef double complex cplx


cdef inline double abs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


def corr_grid(g, wh, int n1, int n2, elev, azim):
    cdef const cplx[::1] gv = np.ascontiguousarray(g, dtype=np.complex128).ravel()
    cdef const cplx[:, ::1] W = np.ascontiguousarray(wh, dtype=np.complex128).reshape(-1, n1 * n2)
    cdef const double[::1] fe = np.ascontiguousarray(elev, dtype=np.float64)
    cdef const double[::1] fa = np.ascontiguousarray(azim, dtype=np.float64)
    cdef Py_ssize_t D = W.shape[0]
    cdef Py_ssize_t ne = fe.shape[0], na = fa.shape[0]
    out_arr = np.zeros((ne, na), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef cplx[::1] x = np.empty(n1, dtype=np.complex128)
    cdef cplx[:, ::1] ytab = np.exp(1j * np.pi * np.outer(np.asarray(fe), np.arange(n2)))
    cdef cplx[::1] gp = np.empty(n2, dtype=np.complex128)
    cdef cplx[:, ::1] P = np.empty((D, n2), dtype=np.complex128)
    cdef Py_ssize_t ia, ie, a, b, d
    cdef double ph, den
    cdef cplx acc, s
    with nogil:
        for ia in range(na):
            for a in range(n1):
                ph = M_PI * fa[ia] * a
                x[a].real = cos(ph)
                x[a].imag = sin(ph)
            # partial sums over the outer axis
            for b in range(n2):
                acc = 0
                for a in range(n1):
                    s = gv[a * n2 + b]
                    s.imag = -s.imag
                    acc = acc + s * x[a]
                gp[b] = acc
            for d in range(D):
                for b in range(n2):
                    acc = 0
                    for a in range(n1):
                        acc = acc + W[d, a * n2 + b] * x[a]
                    P[d, b] = acc
            for ie in range(ne):
                acc = 0
                for b in range(n2):
                    acc = acc + gp[b] * ytab[ie, b]
                den = 0.0
                for d in range(D):
                    s = 0
                    for b in range(n2):
                        s = s + P[d, b] * ytab[ie, b]
                    den = den + abs2(s)
                if den > 0:
                    out[ie, ia] = sqrt(abs2(acc)) / sqrt(den)
    return out_arr


cdef double _residual_sq(const cplx[:, :, ::1] Y, cplx[::1] ar, cplx[::1] at, cplx[::1] ai) noexcept nogil:
    cdef Py_ssize_t i, j, q
    cdef double f = 0.0
    cdef cplx rij, r
    for i in range(Y.shape[0]):
        for j in range(Y.shape[1]):
            rij = ar[i] * at[j]
            for q in range(Y.shape[2]):
                r = Y[i, j, q] - rij * ai[q]
                f = f + abs2(r)
    return f


cdef double _norm2(cplx[::1] v) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(v.shape[0]):
        s = s + abs2(v[i])
    return s


cdef inline cplx _conj(cplx z) noexcept nogil:
    z.imag = -z.imag
    return z


def als_rank1(Y, a_t, a_i, int max_iters, double tol):
    cdef const cplx[:, :, ::1] T = np.ascontiguousarray(Y, dtype=np.complex128)
    cdef Py_ssize_t I = T.shape[0], J = T.shape[1], Q = T.shape[2]
    ar_arr = np.zeros(I, dtype=np.complex128)
    at_arr = np.array(a_t, dtype=np.complex128)
    ai_arr = np.array(a_i, dtype=np.complex128)
    cdef cplx[::1] ar = ar_arr
    cdef cplx[::1] at = at_arr
    cdef cplx[::1] ai = ai_arr
    trace = []
    cdef Py_ssize_t i, j, q, it
    cdef double nr, nt, ni, f, prev = 0.0, y2 = 0.0
    cdef cplx acc, cij
    cdef bint have_prev = False
    for i in range(I):
        for j in range(J):
            for q in range(Q):
                y2 = y2 + abs2(T[i, j, q])
    for it in range(max_iters):
        with nogil:
            nt = _norm2(at)
            ni = _norm2(ai)
            for i in range(I):
                acc = 0
                for j in range(J):
                    cij = _conj(at[j])
                    for q in range(Q):
                        acc = acc + T[i, j, q] * cij * _conj(ai[q])
                ar[i] = acc / (nt * ni)
            nr = _norm2(ar)
            for j in range(J):
                at[j] = 0
            for i in range(I):
                for j in range(J):
                    acc = 0
                    for q in range(Q):
                        acc = acc + T[i, j, q] * _conj(ai[q])
                    at[j] = at[j] + acc * _conj(ar[i])
            for j in range(J):
                at[j] = at[j] / (nr * ni)
            nt = _norm2(at)
            for q in range(Q):
                ai[q] = 0
            for i in range(I):
                for j in range(J):
                    cij = _conj(ar[i] * at[j])
                    for q in range(Q):
                        ai[q] = ai[q] + T[i, j, q] * cij
            for q in range(Q):
                ai[q] = ai[q] / (nr * nt)
            f = _residual_sq(T, ar, at, ai)
        trace.append(f)
        if have_prev and fabs(prev - f) <= tol * y2:
            break
        prev = f
        have_prev = True
    return ar_arr, at_arr, ai_arr, np.array(trace)
