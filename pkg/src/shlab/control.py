"""Lower bound on the localized control cost and its divergence as eps -> 0.

With u0 = phi (the principal eigenfunction of -Laplace - mu Psi_eps, unit L^2
norm) the projection a(t) = <u(t), phi> solves a' + lambda a = b with
b = <f, phi>.  For lambda < 0 this forces

    J(f) >= min{ -(exp(-2 lambda T) - 1) / (16 lambda),  -lambda / (4 ||phi||_{H^1(omega)}) },

and the second term grows without bound because ||phi||_{H^1(omega)} -> 0 on
annular windows while lambda -> -infinity.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .discretize import annulus_mask, stiffness
from .domain import hardy_constant, sphere_area
from .errors import GridError, PreconditionError
from .spectral import DEFAULT_Q, epsilon_sweep

# metadata flags carried by every cost report
REPORT_FLAGS = {
    "h_minus_one_unsquared_in_time": True,
    "b_squared_line_as_printed": True,
    "bound_evaluated_verbatim": True,
}


class CostTerms(NamedTuple):
    term_A: float
    term_B: float
    j_lower: float


def cost_terms(lambda1, phi_h1_omega, T):
    """Both closed-form terms of the bound and their minimum."""
    lam = float(lambda1)
    if not lam < 0:
        raise PreconditionError(f"the bound needs lambda1 < 0, got {lam:g}")
    if not phi_h1_omega > 0:
        raise PreconditionError("phi_h1_omega must be positive")
    if not T > 0:
        raise PreconditionError("T must be positive")
    try:
        A = -math.expm1(-2.0 * lam * T) / (16.0 * lam)
    except OverflowError:
        A = math.inf
    B = -lam / (4.0 * float(phi_h1_omega))
    return CostTerms(A, B, min(A, B))


def cost_lower_bound(lambda1, phi_h1_omega, T):
    return cost_terms(lambda1, phi_h1_omega, T).j_lower


@dataclass
class CostEntry:
    eps: float
    lambda1: float
    phi_h1_omega: float
    term_A: float
    term_B: float
    j_lower: float


@dataclass
class CostReport:
    entries: list
    T: float
    omega: tuple
    mu: float
    n: int
    dropped: list = field(default_factory=list)  # (eps, lambda1, note)

    @property
    def j_lower(self):
        return np.array([e.j_lower for e in self.entries])

    @property
    def increasing(self):
        j = self.j_lower
        return bool(np.all(np.diff(j) > 0))

    @property
    def growth_ratio(self):
        j = self.j_lower
        return float(j[-1] / j[0]) if j.size else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "lambda1", "phi_h1_omega", "term_A", "term_B", "j_lower"])
            for e in self.entries:
                w.writerow([repr(float(x)) for x in
                            (e.eps, e.lambda1, e.phi_h1_omega, e.term_A, e.term_B, e.j_lower)])

    def to_dict(self):
        return {
            "mu": self.mu, "n": self.n, "T": self.T,
            "omega": {"rho": self.omega[0], "delta": self.omega[1]},
            "flags": dict(REPORT_FLAGS),
            "increasing": self.increasing if self.entries else None,
            "growth_ratio": self.growth_ratio if self.entries else None,
            "entries": [vars(e).copy() for e in self.entries],
            "dropped": [{"eps": e, "lambda1": l, "note": note} for e, l, note in self.dropped],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def divergence_sweep(dspec, mu, eps_list, omega=(0.3, 0.3), T=1.0, M=4000, q=DEFAULT_Q,
                     tol=1e-10, workers=1, sweep=None):
    """Cost bound along a decreasing eps sweep.

    Eigenpairs and window norms come from ``epsilon_sweep`` (or a precomputed
    ``sweep``) so they agree bit for bit with the spectral report.  Entries
    with lambda1 >= 0 or a failed solve are dropped with a note.
    """
    C = hardy_constant(dspec.n)
    if not mu > C:
        raise PreconditionError(f"mu must exceed ((n-2)/2)^2 = {C:g}; got {mu:g}")
    if not T > 0:
        raise PreconditionError("T must be positive")
    if sweep is None:
        sweep = epsilon_sweep(dspec, mu, eps_list, window=omega, M=M, q=q, tol=tol, workers=workers)
    rep = CostReport([], float(T), tuple(omega), float(mu), dspec.n)
    for e in sweep.entries:
        if e.error is not None:
            rep.dropped.append((e.eps, e.lambda1, f"eigensolve failed: {e.error}"))
        elif not e.lambda1 < 0:
            rep.dropped.append((e.eps, e.lambda1, "lambda1 >= 0, bound not applicable"))
        elif not e.h1_window_norm > 0:
            rep.dropped.append((e.eps, e.lambda1, "window norm underflowed to zero"))
        else:
            A, B, j = cost_terms(e.lambda1, e.h1_window_norm, T)
            rep.entries.append(CostEntry(e.eps, e.lambda1, e.h1_window_norm, A, B, j))
    return rep


@dataclass
class ProjectionTrace:
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lambda1: float
    residual_times: np.ndarray
    residual: np.ndarray  # a' + lambda a - b at interior times


def project_coefficients(run, eig, op=None):
    """a(t) = <u(t), phi>, b(t) = <f(t), phi> and the ODE residual of a heat run.

    ``run`` must have stored states.  ``op`` (the operator the eigenpair was
    computed from) is checked against the run's grid and potential when
    given; the vector length is always checked.  b is held piecewise
    constant like the forcing, and the residual uses centered differences.
    """
    grid = run.grid
    phi = np.asarray(eig.vector, dtype=float)
    if phi.shape != (grid.M,):
        raise GridError("eigenvector and heat run live on different grids")
    if op is not None:
        same = op.grid is grid or (op.grid.M == grid.M and np.array_equal(op.grid.nodes, grid.nodes))
        if not same or op.pspec != run.op.pspec:
            raise GridError("eigenpair and heat run differ in grid or potential")
    if run.states is None:
        raise PreconditionError("heat run was made without store_states")
    omega = sphere_area(grid.n)
    wphi = omega * grid.quad_weights * phi
    a = run.states @ wphi
    steps = run.steps
    if run.forcing_table is None:
        b = np.zeros(steps + 1)
    else:
        bk = run.forcing_table[:steps] @ wphi
        b = np.append(bk, bk[-1] if steps else 0.0)
    t = run.trace.times
    dt = run.dt
    lam = float(eig.value)
    if steps >= 2:
        da = (a[2:] - a[:-2]) / (2.0 * dt)
        bmid = 0.5 * (b[:-2] + b[1:-1])
        res = da + lam * a[1:-1] - bmid
        rt = t[1:-1]
    else:
        res = np.zeros(0)
        rt = np.zeros(0)
    return ProjectionTrace(t, a, b, lam, rt, res)


class ChainValues(NamedTuple):
    L0: float  # int a^2
    L1: float
    L2: float
    L3: float
    L4: float

    def ordered(self, rtol=1e-12):
        vals = list(self)
        scale = max(1.0, max(abs(v) for v in vals))
        steps = all(vals[i] >= vals[i + 1] - rtol * scale for i in range(3))
        return steps and abs(vals[3] - vals[4]) <= rtol * scale


def estimate_chain(lambda1, T, b):
    """Evaluate every line of the a(t) estimate chain for a given b.

    ``b`` holds values on equal cells of [0, T] (piecewise constant).  On each
    cell a(t) and the convolution are P exp(-lambda s) + Q and int_0^t b^2 is
    linear, so every time integral is evaluated in closed form and the chain
    ordering is exact up to rounding.
    """
    lam = float(lambda1)
    if not lam < 0:
        raise PreconditionError("the chain is derived for lambda1 < 0")
    if not T > 0:
        raise PreconditionError("T must be positive")
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise PreconditionError("b must be a nonempty 1-d series")
    k = b.size
    h = T / k
    kap = -2.0 * lam  # > 0
    E1 = -math.expm1(-lam * h) / lam  # int_0^h exp(-lam s) ds
    E2 = math.expm1(kap * h) / kap  # int_0^h exp(-2 lam s) ds
    F = (h * math.exp(kap * h) - E2) / kap  # int_0^h s exp(-2 lam s) ds
    t = h * np.arange(k)
    g = np.exp(-lam * t)
    conv = np.zeros(k)
    for i in range(k - 1):
        conv[i + 1] = math.exp(-lam * h) * conv[i] + E1 * b[i]
    B = np.concatenate(([0.0], np.cumsum(h * b * b)))[:-1]
    BT = float(np.sum(h * b * b))

    def sq_int(P, Q):
        # int_0^h (P exp(-lam s) + Q)^2 ds
        return P * P * E2 + 2.0 * P * Q * E1 + Q * Q * h

    # conv(t_i + s) = (conv_i - b_i/lam) exp(-lam s) + b_i/lam; a adds g_i exp(-lam s)
    Q = b / lam
    int_a2 = float(np.sum(sq_int(g + conv - Q, Q)))
    int_c2 = float(np.sum(sq_int(conv - Q, Q)))
    # int (exp(-2 lam t) - 1) B(t) dt with B(t_i + s) = B_i + b_i^2 s
    int_eB = float(np.sum(g * g * (B * E2 + b * b * F) - (B * h + b * b * h * h / 2.0)))

    head = -math.expm1(-2.0 * lam * T) / (4.0 * lam)  # 1/2 int_0^T exp(-2 lam t)
    int_e2 = -math.expm1(-2.0 * lam * T) / (2.0 * lam)
    L0 = int_a2
    L1 = head - int_c2
    L2 = head + int_eB / (2.0 * lam)
    L3 = head + int_e2 * BT / (2.0 * lam)
    L4 = head - math.expm1(-2.0 * lam * T) * BT / (4.0 * lam * lam)
    return ChainValues(L0, L1, L2, L3, L4)


def h_minus_one_norm(grid, f):
    """Discrete ||f||_{H^-1(Omega)} = sqrt(omega (W f)^T K0^{-1} (W f))."""
    d, e = stiffness(grid)
    wf = grid.quad_weights * np.asarray(f, dtype=float)
    x = _kernels.spd_solve(d, e, wf)
    return float(math.sqrt(max(sphere_area(grid.n) * (wf @ x), 0.0)))


@dataclass
class RealizedCost:
    state_term: float  # 1/2 int int u^2
    control_term: float  # 1/2 int ||f||_{H^-1} dt (unsquared)
    supported_in_window: bool

    @property
    def value(self):
        return self.state_term + self.control_term


def realized_cost(run, omega=None):
    """The cost functional evaluated on a heat run, with f tabulated per step."""
    grid = run.grid
    l2 = run.trace.l2_sq
    dt = run.dt
    state = 0.5 * float(dt * (l2.sum() - 0.5 * (l2[0] + l2[-1])))
    ctrl = 0.0
    inside = True
    if run.forcing_table is not None:
        tab = run.forcing_table[: run.steps]
        ctrl = 0.5 * dt * sum(h_minus_one_norm(grid, f) for f in tab)
        if omega is not None:
            mask = annulus_mask(grid, *omega)
            inside = bool(np.all(tab[:, ~mask] == 0.0))
    return RealizedCost(state, float(ctrl), inside)
