# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the product-state seesaw search."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_lapack cimport zheev

cnp.import_array()


cdef double _top_eigvec(double complex[::1] h, int n, double complex[::1] out,
                        double complex[::1] work, int lwork, double[::1] rwork, double[::1] w) noexcept nogil:
    # h holds the matrix in column-major order and is overwritten by eigenvectors
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef int info = 0
    cdef int i
    zheev(&jobz, &uplo, &n, &h[0], &n, &w[0], &work[0], &lwork, &rwork[0], &info)
    for i in range(n):
        out[i] = h[(n - 1) * n + i]
    return w[n - 1]


def seesaw_restart(cnp.ndarray q_in, cnp.ndarray a_in, cnp.ndarray b_in, int max_iters, double tol):
    """Alternate exact maximizations of ``<ab|Q|ab>`` from a starting pair.

    ``q_in`` has shape ``(dA, dB, dA, dB)``. Returns ``(a, b, trace)`` where
    ``trace`` lists the overlap before the first step and after every half step.
    """
    cdef const double complex[:, :, :, ::1] q = np.ascontiguousarray(q_in, dtype=np.complex128)
    cdef int da = q.shape[0]
    cdef int db = q.shape[1]
    cdef int nmax = da if da > db else db
    cdef double complex[::1] a = np.ascontiguousarray(a_in, dtype=np.complex128).copy()
    cdef double complex[::1] b = np.ascontiguousarray(b_in, dtype=np.complex128).copy()
    cdef double complex[::1] h = np.empty(nmax * nmax, dtype=np.complex128)
    cdef int lwork = max(1, 2 * nmax - 1) * 4
    cdef double complex[::1] work = np.empty(lwork, dtype=np.complex128)
    cdef double[::1] rwork = np.empty(max(1, 3 * nmax - 2), dtype=np.float64)
    cdef double[::1] w = np.empty(nmax, dtype=np.float64)
    trace = np.empty(1 + 2 * max_iters, dtype=np.float64)
    cdef double[::1] tr = trace
    cdef int i, j, k, l, it, count
    cdef double complex s
    cdef double ov, prev

    s = 0
    for i in range(da):
        for j in range(db):
            for k in range(da):
                for l in range(db):
                    s = s + (a[i] * b[j]).conjugate() * q[i, j, k, l] * a[k] * b[l]
    tr[0] = s.real
    prev = s.real
    count = 1
    with nogil:
        for it in range(max_iters):
            # fix a: B-side operator H[j, l] stored column-major at l * db + j
            for j in range(db):
                for l in range(db):
                    s = 0
                    for i in range(da):
                        for k in range(da):
                            s = s + a[i].conjugate() * q[i, j, k, l] * a[k]
                    h[l * db + j] = s
            ov = _top_eigvec(h, db, b, work, lwork, rwork, w)
            tr[count] = ov
            count += 1
            # fix b: A-side operator
            for i in range(da):
                for k in range(da):
                    s = 0
                    for j in range(db):
                        for l in range(db):
                            s = s + b[j].conjugate() * q[i, j, k, l] * b[l]
                    h[k * da + i] = s
            ov = _top_eigvec(h, da, a, work, lwork, rwork, w)
            tr[count] = ov
            count += 1
            if ov - prev < tol:
                break
            prev = ov
    return np.asarray(a), np.asarray(b), trace[:count].copy()
