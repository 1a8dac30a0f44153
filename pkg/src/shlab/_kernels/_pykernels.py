"""Reference kernels in plain Python/NumPy/SciPy.

Same signatures as the compiled module.  Solves go through LAPACK's banded
Cholesky, so only the Sturm count is a genuine Python loop.
"""
import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from shlab.errors import NotPositiveDefinite


def sturm_count(a, e, w, sigma):
    """Number of eigenvalues of the pencil (A, diag(w)) strictly below sigma."""
    a = np.asarray(a, dtype=float).tolist()
    e = np.asarray(e, dtype=float).tolist()
    w = np.asarray(w, dtype=float).tolist()
    tiny = 1e-300
    q = a[0] - sigma * w[0]
    if q == 0.0:
        q = -tiny
    count = 1 if q < 0.0 else 0
    for i in range(1, len(a)):
        q = a[i] - sigma * w[i] - e[i - 1] * e[i - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def _first_bad_pivot(a, e):
    piv = a[0]
    if not piv > 0.0:
        return 0, piv
    for i in range(1, len(a)):
        piv = a[i] - e[i - 1] * e[i - 1] / piv
        if not piv > 0.0:
            return i, piv
    return -1, piv


def _factor(a, e):
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    ab = np.zeros((2, a.size))
    ab[0, 1:] = e
    ab[1] = a
    try:
        return cholesky_banded(ab, lower=False)
    except LinAlgError:
        idx, piv = _first_bad_pivot(a.tolist(), e.tolist())
        raise NotPositiveDefinite(idx, piv) from None


def spd_solve(a, e, rhs):
    """Solve A x = rhs for symmetric positive definite tridiagonal A."""
    c = _factor(a, e)
    return cho_solve_banded((c, False), np.asarray(rhs, dtype=float))


def _quad(d, e, u):
    # u^T K u for a zero-row-sum stiffness with a Dirichlet last row
    return float((d[-1] + e[-1]) * u[-1] * u[-1] - e @ np.diff(u) ** 2)


def heat_march(b_diag, b_off, a_diag, a_off, theta, k_diag, k_off, w, wp,
               forcing, u0, dt, nsteps, store_states=False, blowup_limit=1e150):
    c = _factor(b_diag, b_off)
    a_diag = np.asarray(a_diag, dtype=float)
    a_off = np.asarray(a_off, dtype=float)
    k_diag = np.asarray(k_diag, dtype=float)
    k_off = np.asarray(k_off, dtype=float)
    w = np.asarray(w, dtype=float)
    wp = np.asarray(wp, dtype=float)
    f = None if forcing is None else np.asarray(forcing, dtype=float)
    u = np.array(u0, dtype=float)
    m = u.size

    l2 = np.full(nsteps + 1, np.nan)
    grad = np.full(nsteps + 1, np.nan)
    pot = np.full(nsteps + 1, np.nan)
    forc = np.full(nsteps + 1, np.nan)
    states = np.full((nsteps + 1, m), np.nan) if store_states else None

    def record(k, fk):
        l2[k] = w @ (u * u)
        pot[k] = wp @ (u * u)
        forc[k] = 0.0 if fk is None else w @ (fk * u)
        grad[k] = _quad(k_diag, k_off, u)
        if states is not None:
            states[k] = u

    record(0, None if f is None else f[0])
    expl = (1.0 - theta) * dt
    steps_done = 0
    blew = False
    for k in range(nsteps):
        rhs = w * u
        if expl != 0.0:
            au = a_diag * u
            au[:-1] += a_off * u[1:]
            au[1:] += a_off * u[:-1]
            rhs -= expl * au
        if f is not None:
            rhs += dt * w * f[k]
        u = cho_solve_banded((c, False), rhs)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > blowup_limit:
            blew = True
            break
        steps_done = k + 1
        record(k + 1, None if f is None else f[k])

    return {
        "l2": l2, "grad": grad, "pot": pot, "forc": forc,
        "u": u, "steps_done": steps_done, "blowup": blew,
        "states": states,
    }
