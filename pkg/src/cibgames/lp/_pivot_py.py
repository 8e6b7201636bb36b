"""Pure-numpy fallback for the simplex pivot loop.

Same algorithm and arithmetic as the compiled kernel in ``_pivot_c.pyx``:
Bland's rule (lowest eligible index enters; ratio ties leave by lowest basic
variable index), pivot row normalized before elimination.
"""
import numpy as np

KERNEL = "python"

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

RATIO_TOL = 1e-9
# degenerate pivots tolerated before switching to the anti-cycling tie-break
STALL_LIMIT = 100


def pivot_loop(tab, basis, allowed, tol, piv_tol, max_iter):
    """Run Bland-rule simplex pivots on a dense tableau, in place.

    tab has shape (m+1, n+1): m constraint rows, objective row last
    (reduced costs c - z for a maximization), rhs in the last column.
    basis[i] is the variable index basic in row i.  allowed[j] masks
    columns permitted to enter.  Returns (status, iterations).
    """
    m = tab.shape[0] - 1
    n = tab.shape[1] - 1
    obj = tab[m]
    iters = 0
    stall = 0
    while iters < max_iter:
        # Bland: lowest-index allowed column with positive reduced cost.
        enter = -1
        for j in range(n):
            if allowed[j] and obj[j] > tol:
                enter = j
                break
        if enter < 0:
            return STATUS_OPTIMAL, iters
        col = tab[:m, enter]
        leave = -1
        best_ratio = 0.0
        for i in range(m):
            a = col[i]
            if a > piv_tol:
                ratio = tab[i, n] / a
                if leave < 0 or ratio < best_ratio:
                    leave = i
                    best_ratio = ratio
        if leave < 0:
            return STATUS_UNBOUNDED, iters
        if stall <= STALL_LIMIT:
            # among near-minimal ratios take the largest pivot element (ties
            # by lowest basic index); degenerate ties are common and a small
            # pivot there needlessly amplifies roundoff
            for i in range(m):
                a = col[i]
                if a > piv_tol:
                    if tab[i, n] / a <= best_ratio + RATIO_TOL and (
                        a > col[leave]
                        or (a == col[leave] and basis[i] < basis[leave])
                    ):
                        leave = i
        else:
            # long degenerate stall: Bland's tie-break restores the
            # finite-termination guarantee
            for i in range(m):
                a = col[i]
                if a > piv_tol:
                    if tab[i, n] / a <= best_ratio and basis[i] < basis[leave]:
                        leave = i
        stall = 0 if tab[leave, n] > 1e-12 else stall + 1
        piv = tab[leave, enter]
        tab[leave] /= piv
        factors = tab[:, enter].copy()
        factors[leave] = 0.0
        tab -= np.outer(factors, tab[leave])
        basis[leave] = enter
        iters += 1
    return STATUS_ITER_LIMIT, iters
