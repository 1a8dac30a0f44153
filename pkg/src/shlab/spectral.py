"""Principal eigenpair of the regularized operator and epsilon sweeps.

The smallest eigenvalue of the pencil (A, W), A = K - mu*diag(W psi), is
bracketed by Sturm counts (Sylvester inertia of A - sigma*W) and then
polished by shifted inverse iteration.  Keeping the shift below lambda_1
makes A - s*W a Stieltjes matrix, so the iterates stay strictly positive.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .discretize import assemble, build_grid, h1_norm_annulus, DEFAULT_Q, DEFAULT_HMIN
from .domain import PotentialSpec, hardy_constant, sphere_area
from .errors import EigenSolverError, NotPositiveDefinite, PreconditionError, ShlabError

log = logging.getLogger(__name__)


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    bisection_steps: int = 0

    @property
    def lam(self):
        return self.value


def pencil_residual(a, e, w, v, lam):
    """Backward error of (lam, v) for the pencil (A, W), measured in the W^-1 norm.

    ||A v - lam W v|| / (|| |A| |v| || + |lam| ||W v||).  Rounding alone puts
    this near machine epsilon however strongly the grid is graded.
    """
    av = a * v
    av[:-1] += e * v[1:]
    av[1:] += e * v[:-1]
    absv = np.abs(v)
    scale = np.abs(a) * absv
    scale[:-1] += np.abs(e) * absv[1:]
    scale[1:] += np.abs(e) * absv[:-1]
    sw = np.sqrt(w)
    num = np.linalg.norm((av - lam * w * v) / sw)
    den = np.linalg.norm(scale / sw) + abs(lam) * np.linalg.norm(sw * v)
    return float(num / den)


def _row_sums(a, e):
    s = a.copy()
    s[:-1] += e
    s[1:] += e
    return s


def _rayleigh(s, e, w, v):
    # v^T A v = sum s v^2 - sum e (dv)^2 with s the row sums of A; the
    # difference form avoids cancelling terms of size v^2/h on fine cells
    return float((s @ (v * v) - e @ np.diff(v) ** 2) / (w @ (v * v)))


def _lower_bound(a, e, w):
    absoff = np.zeros_like(a)
    absoff[:-1] += np.abs(e)
    absoff[1:] += np.abs(e)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = float(np.min((a - absoff) / w))
    if not np.isfinite(g):
        raise PreconditionError("mass/weight vector underflows; coarsen the grid")
    return g - 1e-9 * max(1.0, abs(g))


def lowest_pencil(a, e, w, tol=1e-10, max_iter=50, start=None, omega=1.0,
                  bisect_rtol=1e-12, shift_margin=1e-9, row_sums=None):
    """Smallest eigenpair of the symmetric tridiagonal pencil (A, diag(w)).

    The vector is normalized to ``omega * sum(w v^2) = 1`` and made
    positive-leaning.  Converged means both the backward error and the
    W-norm change of the vector between iterations are at most ``tol``;
    otherwise :class:`EigenSolverError` is raised after ``max_iter``
    inverse iterations.
    """
    a = np.ascontiguousarray(a, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    rs = _row_sums(a, e) if row_sums is None else np.asarray(row_sums, dtype=float)
    v = np.ones_like(a) if start is None else np.array(start, dtype=float)
    v /= np.sqrt(omega * (w @ (v * v)))
    theta = _rayleigh(rs, e, w, v)
    res = pencil_residual(a, e, w, v, theta)
    if res <= tol:
        return EigenPair(theta, v, res, 0, 0)

    lo = _lower_bound(a, e, w)
    while _kernels.sturm_count(a, e, w, lo) > 0:  # pragma: no cover - guard
        lo -= max(1.0, abs(lo))
    hi = theta
    step = 1e-12 * max(1.0, abs(hi))
    while _kernels.sturm_count(a, e, w, hi) == 0:
        hi += step
        step *= 2.0
    steps = 0
    while hi - lo > bisect_rtol * max(1.0, abs(lo), abs(hi)) and steps < 2200:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _kernels.sturm_count(a, e, w, mid) > 0:
            hi = mid
        else:
            lo = mid
        steps += 1

    # a shift within rounding of lambda_1 makes A - s*W numerically indefinite
    margin = shift_margin * max(1.0, abs(lo))
    shift = lo - margin
    for it in range(1, max_iter + 1):
        while True:
            try:
                x = _kernels.spd_solve(a - shift * w, e, w * v)
                break
            except NotPositiveDefinite:
                margin *= 10.0
                shift = lo - margin
        x /= np.sqrt(omega * (w @ (x * x)))
        if x @ (w * v) < 0:
            x = -x
        # the residual is blind to relative contamination in exponentially
        # small regions, so the update itself must also settle
        change = np.sqrt(omega * (w @ ((x - v) ** 2)))
        v = x
        theta = _rayleigh(rs, e, w, v)
        res = pencil_residual(a, e, w, v, theta)
        if res <= tol and change <= tol:
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
            return EigenPair(theta, v, res, it, steps)
    raise EigenSolverError(
        f"inverse iteration stalled at residual {res:.3e} > tol {tol:.1e}",
        vector=v, value=theta, residual=res,
    )


def principal_eigenpair(op, tol=1e-10, max_iter=50, start=None):
    """Principal eigenpair of ``op`` with unit L^2(Omega) normalization."""
    return lowest_pencil(
        op.diag, op.off, op.mass_diag, tol=tol, max_iter=max_iter, start=start,
        omega=sphere_area(op.grid.n), row_sums=op.row_sums,
    )


def sweep_grid(dspec, eps, M=4000, q=DEFAULT_Q):
    """Grid whose first node sits at min(1e-6 R, eps/100)."""
    R = dspec.radius
    return build_grid(dspec.n, R, M, "geometric", q=q, h_min=min(DEFAULT_HMIN * R, eps / 100.0))


@dataclass
class SweepEntry:
    eps: float
    lambda1: float
    h1_window_norm: float
    iterations: int
    residual: float
    error: str | None = None
    eigenpair: EigenPair | None = field(default=None, repr=False)
    op: object = field(default=None, repr=False)


@dataclass
class EigenSweepReport:
    entries: list
    window: tuple
    mu: float
    n: int
    R: float
    M: int

    @property
    def ok_entries(self):
        return [e for e in self.entries if e.error is None]

    def lambdas(self):
        return np.array([e.lambda1 for e in self.ok_entries])

    def h1_norms(self):
        return np.array([e.h1_window_norm for e in self.ok_entries])

    def rows(self):
        return [
            (e.eps, e.lambda1, e.h1_window_norm, e.iterations, e.residual)
            for e in self.entries
        ]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "lambda1", "h1_window_norm", "iterations", "residual"])
            for row in self.rows():
                w.writerow([_fmt(x) for x in row])

    def to_dict(self):
        return {
            "mu": self.mu, "n": self.n, "R": self.R, "M": self.M,
            "window": {"rho": self.window[0], "delta": self.window[1]},
            "entries": [
                {"eps": e.eps, "lambda1": e.lambda1, "h1_window_norm": e.h1_window_norm,
                 "iterations": e.iterations, "residual": e.residual, "error": e.error}
                for e in self.entries
            ],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _solve_one(dspec, mu, eps, window, M, q, tol, max_iter, keep):
    rho, delta = window
    try:
        grid = sweep_grid(dspec, eps, M, q)
        op = assemble(grid, dspec, PotentialSpec.regularized(eps, mu))
        eig = principal_eigenpair(op, tol=tol, max_iter=max_iter)
    except ShlabError as exc:
        log.warning("eps=%g failed: %s", eps, exc)
        return SweepEntry(eps, float("nan"), float("nan"), 0, float("nan"), error=str(exc))
    h1 = h1_norm_annulus(grid, eig.vector, rho, delta).value
    return SweepEntry(
        eps, eig.value, h1, eig.iterations, eig.residual,
        eigenpair=eig if keep else None, op=op if keep else None,
    )


def epsilon_sweep(dspec, mu, eps_list, window=(0.3, 0.3), M=4000, q=DEFAULT_Q,
                  tol=1e-10, max_iter=50, workers=1, keep_eigenpairs=False):
    """Principal eigenvalue and window H^1 norm for each eps (strictly decreasing)."""
    C = hardy_constant(dspec.n)
    if not mu > C:
        raise PreconditionError(f"mu must exceed ((n-2)/2)^2 = {C:g}; got {mu:g}")
    eps_list = [float(x) for x in eps_list]
    if not eps_list or any(x <= 0 for x in eps_list):
        raise PreconditionError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise PreconditionError("eps_list must be strictly decreasing")
    rho, delta = window
    R = dspec.radius
    if rho >= (1.0 - delta) * R:
        raise PreconditionError("window {rho < r < (1-delta) R} is empty")

    def job(eps):
        return _solve_one(dspec, mu, eps, (rho, delta), M, q, tol, max_iter, keep_eigenpairs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(job, eps_list))
    else:
        entries = [job(eps) for eps in eps_list]
    return EigenSweepReport(entries, (rho, delta), float(mu), dspec.n, R, M)


def power_law_slope(eps, lambdas):
    """Least-squares slope of log|lambda| against log(1/eps)."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.log(np.abs(np.asarray(lambdas, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _smoothstep_d1(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _smoothstep_d2(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


def cutoff_bump(r, rho, delta, R):
    """C^2 cut-off: 1 on [rho, (1-delta)R], 0 below rho/2 and above (1-delta/2)R.

    Returns eta, eta' and eta'' at ``r``.
    """
    r = np.asarray(r, dtype=float)
    a0, a1 = 0.5 * rho, rho
    b0, b1 = (1.0 - delta) * R, (1.0 - 0.5 * delta) * R
    tl = (r - a0) / (a1 - a0)
    tr = (b1 - r) / (b1 - b0)
    sl, sr = _smoothstep(tl), _smoothstep(tr)
    dl, dr = _smoothstep_d1(tl) / (a1 - a0), -_smoothstep_d1(tr) / (b1 - b0)
    ddl, ddr = _smoothstep_d2(tl) / (a1 - a0) ** 2, _smoothstep_d2(tr) / (b1 - b0) ** 2
    eta = sl * sr
    d1 = dl * sr + sl * dr
    d2 = ddl * sr + 2.0 * dl * dr + sl * ddr
    return eta, d1, d2


def bump_laplacian(r, rho, delta, R, n):
    eta, d1, d2 = cutoff_bump(r, rho, delta, R)
    return eta, d2 + (n - 1) * d1 / np.asarray(r, dtype=float)


@dataclass
class IdentityCheck:
    lhs: float
    rhs: float
    rel_error: float


def localization_identity(op, eig, rho, delta):
    """Check int eta|grad phi|^2 - lam int eta phi^2 = mu int eta Psi phi^2 + 1/2 int phi^2 Lap eta."""
    grid = op.grid
    phi = eig.vector
    eta, lap_eta = bump_laplacian(grid.nodes, rho, delta, grid.R, grid.n)
    g = grid.gradient(phi)
    lhs = grid.integrate_domain(eta * g * g) - eig.value * grid.integrate_domain(eta * phi * phi)
    rhs = (op.mu * grid.integrate_domain(eta * op.potential_diag * phi * phi)
           + 0.5 * grid.integrate_domain(phi * phi * lap_eta))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
