# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tridiagonal kernels.

Every routine here has a twin in ``_pykernels`` with the same signature and
the same results up to rounding; ``shlab._kernels`` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

from shlab.errors import NotPositiveDefinite

cnp.import_array()


def sturm_count(const double[::1] a, const double[::1] e, const double[::1] w,
                double sigma):
    """Number of eigenvalues of the pencil (A, diag(w)) strictly below sigma.

    A is symmetric tridiagonal with diagonal ``a`` and off-diagonal ``e``;
    ``w`` must be positive.  Counts negative pivots of A - sigma*W.
    """
    cdef Py_ssize_t m = a.shape[0], i
    cdef double q, tiny = 1e-300
    cdef long count = 0
    with nogil:
        q = a[0] - sigma * w[0]
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
        for i in range(1, m):
            q = a[i] - sigma * w[i] - e[i - 1] * e[i - 1] / q
            if q == 0.0:
                q = -tiny
            if q < 0.0:
                count += 1
    return count


cdef int _ldl_factor(const double[::1] a, const double[::1] e,
                     double[::1] piv, double[::1] mult) noexcept nogil:
    cdef Py_ssize_t m = a.shape[0], i
    piv[0] = a[0]
    if not piv[0] > 0.0:
        return 0
    for i in range(1, m):
        mult[i - 1] = e[i - 1] / piv[i - 1]
        piv[i] = a[i] - mult[i - 1] * e[i - 1]
        if not piv[i] > 0.0:
            return <int>i
    return -1


cdef void _ldl_solve(const double[::1] piv, const double[::1] mult,
                     double[::1] x) noexcept nogil:
    cdef Py_ssize_t m = piv.shape[0], i
    for i in range(1, m):
        x[i] -= mult[i - 1] * x[i - 1]
    x[m - 1] /= piv[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = x[i] / piv[i] - mult[i] * x[i + 1]


def spd_solve(const double[::1] a, const double[::1] e, rhs):
    """Solve A x = rhs for symmetric positive definite tridiagonal A."""
    cdef Py_ssize_t m = a.shape[0]
    cdef double[::1] piv = np.empty(m)
    cdef double[::1] mult = np.empty(max(m - 1, 1))
    cdef int bad
    with nogil:
        bad = _ldl_factor(a, e, piv, mult)
    if bad >= 0:
        raise NotPositiveDefinite(bad, piv[bad])
    out = np.array(rhs, dtype=np.float64, copy=True, order="C")
    cdef double[::1] x = out
    with nogil:
        _ldl_solve(piv, mult, x)
    return out


cdef inline double _quad(const double[::1] d, const double[::1] e,
                         const double[::1] u) noexcept nogil:
    # u^T K u for a zero-row-sum stiffness with a Dirichlet last row, summed
    # over differences so fine cells do not cancel
    cdef Py_ssize_t m = d.shape[0], i
    cdef double s = (d[m - 1] + e[m - 2]) * u[m - 1] * u[m - 1]
    for i in range(m - 1):
        s -= e[i] * (u[i + 1] - u[i]) * (u[i + 1] - u[i])
    return s


def heat_march(const double[::1] b_diag, const double[::1] b_off,
               const double[::1] a_diag, const double[::1] a_off,
               double theta,
               const double[::1] k_diag, const double[::1] k_off,
               const double[::1] w, const double[::1] wp,
               forcing, u0, double dt, Py_ssize_t nsteps,
               bint store_states=False, double blowup_limit=1e150):
    """Advance W u' = -A u + W f with the theta scheme.

    ``b_diag``/``b_off`` hold W + theta*dt*A.  Returns a dict with per-level
    quadratic forms (l2, grad, pot, forc), the final state, the number of
    steps completed and, optionally, every state.
    """
    cdef Py_ssize_t m = b_diag.shape[0], i, k, steps_done = 0
    cdef double[::1] piv = np.empty(m)
    cdef double[::1] mult = np.empty(max(m - 1, 1))
    cdef int bad
    with nogil:
        bad = _ldl_factor(b_diag, b_off, piv, mult)
    if bad >= 0:
        raise NotPositiveDefinite(bad, piv[bad])

    cdef bint has_f = forcing is not None
    cdef const double[:, ::1] f
    if has_f:
        f = np.ascontiguousarray(forcing, dtype=np.float64)
    u_arr = np.array(u0, dtype=np.float64, copy=True, order="C")
    cdef double[::1] u = u_arr
    cdef double[::1] rhs = np.empty(m)
    l2_arr = np.full(nsteps + 1, np.nan)
    grad_arr = np.full(nsteps + 1, np.nan)
    pot_arr = np.full(nsteps + 1, np.nan)
    forc_arr = np.full(nsteps + 1, np.nan)
    cdef double[::1] l2 = l2_arr, grad = grad_arr, pot = pot_arr, forc = forc_arr
    states_arr = np.full((nsteps + 1, m), np.nan) if store_states else None
    cdef double[:, ::1] states
    if store_states:
        states = states_arr
        states[0, :] = u
    cdef double expl = (1.0 - theta) * dt, s, au, umax
    cdef bint blew = False

    with nogil:
        l2[0] = 0.0
        pot[0] = 0.0
        forc[0] = 0.0
        for i in range(m):
            l2[0] += w[i] * u[i] * u[i]
            pot[0] += wp[i] * u[i] * u[i]
            if has_f:
                forc[0] += w[i] * f[0, i] * u[i]
        grad[0] = _quad(k_diag, k_off, u)

        for k in range(nsteps):
            for i in range(m):
                s = w[i] * u[i]
                if expl != 0.0:
                    au = a_diag[i] * u[i]
                    if i > 0:
                        au += a_off[i - 1] * u[i - 1]
                    if i < m - 1:
                        au += a_off[i] * u[i + 1]
                    s -= expl * au
                if has_f:
                    s += dt * w[i] * f[k, i]
                rhs[i] = s
            _ldl_solve(piv, mult, rhs)
            umax = 0.0
            for i in range(m):
                u[i] = rhs[i]
                if not isfinite(u[i]):
                    umax = blowup_limit * 2.0
                elif fabs(u[i]) > umax:
                    umax = fabs(u[i])
            if umax > blowup_limit:
                blew = True
                break
            steps_done = k + 1
            l2[k + 1] = 0.0
            pot[k + 1] = 0.0
            forc[k + 1] = 0.0
            for i in range(m):
                l2[k + 1] += w[i] * u[i] * u[i]
                pot[k + 1] += wp[i] * u[i] * u[i]
                if has_f:
                    forc[k + 1] += w[i] * f[k, i] * u[i]
            grad[k + 1] = _quad(k_diag, k_off, u)
            if store_states:
                states[k + 1, :] = u

    return {
        "l2": l2_arr, "grad": grad_arr, "pot": pot_arr, "forc": forc_arr,
        "u": u_arr, "steps_done": steps_done, "blowup": bool(blew),
        "states": states_arr,
    }
