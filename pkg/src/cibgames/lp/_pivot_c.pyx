# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex pivot loop.  Mirrors _pivot_py.pivot_loop exactly."""
import numpy as np

cimport numpy as cnp

KERNEL = "cython"

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

RATIO_TOL = 1e-9
# degenerate pivots tolerated before switching to the anti-cycling tie-break
STALL_LIMIT = 100


def pivot_loop(double[:, ::1] tab, long[::1] basis, unsigned char[::1] allowed,
               double tol, double piv_tol, long max_iter):
    cdef Py_ssize_t m = tab.shape[0] - 1
    cdef Py_ssize_t n = tab.shape[1] - 1
    cdef Py_ssize_t i, j, enter, leave
    cdef double a, ratio, best_ratio, piv, f
    cdef long iters = 0
    cdef long stall = 0
    cdef double ratio_tol = RATIO_TOL
    cdef long stall_limit = STALL_LIMIT
    while iters < max_iter:
        enter = -1
        for j in range(n):
            if allowed[j] and tab[m, j] > tol:
                enter = j
                break
        if enter < 0:
            return 0, iters
        leave = -1
        best_ratio = 0.0
        for i in range(m):
            a = tab[i, enter]
            if a > piv_tol:
                ratio = tab[i, n] / a
                if leave < 0 or ratio < best_ratio:
                    leave = i
                    best_ratio = ratio
        if leave < 0:
            return 1, iters
        if stall <= stall_limit:
            # among near-minimal ratios take the largest pivot element (ties
            # by lowest basic index); degenerate ties are common and a small
            # pivot there needlessly amplifies roundoff
            for i in range(m):
                a = tab[i, enter]
                if a > piv_tol:
                    if tab[i, n] / a <= best_ratio + ratio_tol and (
                        a > tab[leave, enter]
                        or (a == tab[leave, enter] and basis[i] < basis[leave])
                    ):
                        leave = i
        else:
            # long degenerate stall: Bland's tie-break restores the
            # finite-termination guarantee
            for i in range(m):
                a = tab[i, enter]
                if a > piv_tol:
                    if tab[i, n] / a <= best_ratio and basis[i] < basis[leave]:
                        leave = i
        stall = 0 if tab[leave, n] > 1e-12 else stall + 1
        piv = tab[leave, enter]
        for j in range(n + 1):
            tab[leave, j] /= piv
        for i in range(m + 1):
            if i == leave:
                continue
            f = tab[i, enter]
            if f != 0.0:
                for j in range(n + 1):
                    tab[i, j] -= f * tab[leave, j]
        basis[leave] = enter
        iters += 1
    return 2, iters
