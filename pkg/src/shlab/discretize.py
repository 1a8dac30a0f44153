"""Radial finite-volume discretization of -Laplace - mu*Psi on a ball.

Radially symmetric u(r) on (0, R) is represented at nodes r_1 < ... < r_M.
The Dirichlet value u(R) = 0 is eliminated and the origin carries zero flux.
Face conductances r_face^(n-1) / h give a symmetric tridiagonal stiffness K
with

    u^T K u  ~  int_0^R |u'|^2 r^(n-1) dr,

and the lumped mass is the trapezoid weight r_i^(n-1) (h_- + h_+)/2.  Every
integral over Omega picks up the unit-sphere area ``sphere_area(n)``; the
radial arrays here do not include it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .domain import DomainSpec, PotentialSpec, radial_profile, sphere_area
from .errors import GridError, UnsupportedDomainError

DEFAULT_Q = 0.85
DEFAULT_HMIN = 1e-6  # relative to R


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    n: int
    R: float
    grading: dict
    gaps: np.ndarray  # M+1 spacings, gaps[0] = r_1, gaps[-1] = R - r_M
    dist: np.ndarray  # R - r_i, accumulated from the boundary side
    quad_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "quad_weights", _trapezoid_weights(self.nodes, self.gaps, self.n))

    @property
    def M(self):
        return self.nodes.size

    @property
    def boundary_weight(self):
        """Trapezoid weight of the node r = R, which the nodal arrays omit."""
        return self.R ** (self.n - 1) * 0.5 * self.gaps[-1]

    def integrate(self, f, f_R=0.0):
        """int_0^R f r^(n-1) dr by the trapezoid rule.

        Nodal functions vanish at r = R, so the boundary value defaults to 0;
        pass ``f_R`` to integrate functions that do not.
        """
        return float(self.quad_weights @ np.asarray(f, dtype=float) + f_R * self.boundary_weight)

    def integrate_domain(self, f, f_R=0.0):
        """Integral over the ball of a radial function given at the nodes."""
        return sphere_area(self.n) * self.integrate(f, f_R)

    def gradient(self, u):
        """Centered difference quotients on the nonuniform nodes (u(R) = 0).

        Spacings come from ``gaps`` so nodes that round to R stay distinct.
        The first node uses a one-sided quotient.
        """
        u = np.asarray(u, dtype=float)
        v = np.append(u, 0.0)
        hm = self.gaps[:-1]
        hp = self.gaps[1:]
        g = np.empty_like(u)
        g[1:] = (hm[1:] ** 2 * v[2:] - hp[1:] ** 2 * v[:-2]
                 + (hp[1:] ** 2 - hm[1:] ** 2) * v[1:-1]) / (hm[1:] * hp[1:] * (hm[1:] + hp[1:]))
        g[0] = (v[1] - v[0]) / hp[0]
        return g


def _trapezoid_weights(r, gaps, n):
    # trapezoid rule for int f r^(n-1) dr; end nodes r=0 and r=R carry no weight
    return r ** (n - 1) * 0.5 * (gaps[:-1] + gaps[1:])


def _ramp(h_min, q, H, cap):
    out = []
    h = h_min
    while h < H and len(out) < cap:
        out.append(h)
        h /= q
    return out


def build_grid(n, R, M, grading="geometric", q=DEFAULT_Q, h_min=None):
    """Radial grid with M interior nodes on (0, R).

    ``grading="uniform"`` places r_i = i R / (M+1).  ``"geometric"`` starts
    with spacing ``h_min`` (default 1e-6 R) at both r = 0 and r = R and grows
    it by 1/q per cell until it meets a uniform middle section.
    """
    if int(M) != M or M < 3:
        raise GridError(f"need at least 3 nodes, got {M!r}")
    if not R > 0:
        raise GridError("R must be positive")
    M = int(M)
    if grading == "uniform":
        gaps = np.full(M + 1, R / (M + 1))
        desc = {"kind": "uniform"}
    elif grading == "geometric":
        if not 0 < q < 1:
            raise GridError(f"grading ratio q must lie in (0, 1), got {q!r}")
        h_min = DEFAULT_HMIN * R if h_min is None else float(h_min)
        if not 0 < h_min < R / 2:
            raise GridError("h_min must lie in (0, R/2)")
        cap = M // 2
        gaps = _geometric_gaps(R, M, q, h_min, cap)
        desc = {"kind": "geometric", "q": float(q), "h_min": float(h_min)}
    else:
        raise GridError(f"unknown grading {grading!r}")
    r = np.cumsum(gaps)[:-1]
    dist = np.cumsum(gaps[::-1])[::-1][1:]
    if np.any(gaps <= 0) or np.any(dist <= 0):
        raise GridError("grid spacings collapsed; reduce M or raise h_min")
    return RadialGrid(r, int(n), float(R), desc, gaps, dist)


def _geometric_gaps(R, M, q, h_min, cap):
    if (M + 1) * h_min >= R:
        return np.full(M + 1, R / (M + 1))

    def total(H):
        ramp = _ramp(h_min, q, H, cap)
        return 2.0 * sum(ramp) + (M + 1 - 2 * len(ramp)) * H

    lo, hi = h_min, R
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) > R:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    ramp = _ramp(h_min, q, lo, cap)
    count = M + 1 - 2 * len(ramp)
    middle = (R - 2.0 * sum(ramp)) / count
    return np.array(ramp + [middle] * count + ramp[::-1])


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Symmetric tridiagonal form of -Laplace - mu*Psi against diag(mass)."""

    grid: RadialGrid
    dspec: DomainSpec
    pspec: PotentialSpec
    stiff_diag: np.ndarray
    stiff_off: np.ndarray
    potential_diag: np.ndarray
    mass_diag: np.ndarray

    @property
    def mu(self):
        return self.pspec.mu

    @property
    def diag(self):
        """Diagonal of K - mu * diag(mass * psi)."""
        return self.stiff_diag - self.mu * self.mass_diag * self.potential_diag

    @property
    def off(self):
        return self.stiff_off

    def stiffness_dense(self):
        return _dense(self.stiff_diag, self.stiff_off)

    def matrix_dense(self):
        return _dense(self.diag, self.off)

    def apply(self, u):
        """Pointwise action (A u) / mass, the discrete -Laplace u - mu Psi u."""
        return _matvec(self.diag, self.off, u) / self.mass_diag

    @property
    def row_sums(self):
        """Exact row sums of K - mu diag(mass psi); only the Dirichlet row of K is nonzero."""
        s = -self.mu * self.mass_diag * self.potential_diag
        s[-1] += boundary_conductance(self.grid)
        return s

    def stiffness_form(self, u):
        """u^T K u (radial, without the sphere area), summed over cell differences."""
        u = np.asarray(u, dtype=float)
        return float(-self.stiff_off @ np.diff(u) ** 2 + boundary_conductance(self.grid) * u[-1] ** 2)

    def energy_form(self, u):
        u = np.asarray(u, dtype=float)
        return self.stiffness_form(u) - self.mu * float((self.mass_diag * self.potential_diag) @ (u * u))

    def mass_form(self, u):
        u = np.asarray(u, dtype=float)
        return float(self.mass_diag @ (u * u))

    def rayleigh(self, u):
        return self.energy_form(u) / self.mass_form(u)

    def with_potential(self, pspec):
        return assemble(self.grid, self.dspec, pspec)


def _dense(d, e):
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def _matvec(d, e, u):
    u = np.asarray(u, dtype=float)
    out = d * u
    out[:-1] += e * u[1:]
    out[1:] += e * u[:-1]
    return out


def boundary_conductance(grid):
    """Conductance of the last cell, which couples r_M to the Dirichlet value at R."""
    return (grid.R - 0.5 * grid.gaps[-1]) ** (grid.n - 1) / grid.gaps[-1]


def stiffness(grid):
    """Diagonal and off-diagonal of the Dirichlet radial stiffness."""
    n1 = grid.n - 1
    r = grid.nodes
    faces = r[:-1] + 0.5 * grid.gaps[1:-1]
    cond = faces ** n1 / grid.gaps[1:-1]
    cond_R = boundary_conductance(grid)
    d = np.zeros_like(r)
    d[:-1] += cond
    d[1:] += cond
    d[-1] += cond_R
    return d, -cond


def sample_potential(grid, dspec, pspec):
    return np.asarray(radial_profile(dspec.n, grid.R, pspec, grid.nodes, grid.dist), dtype=float)


def assemble(grid, dspec, pspec):
    if not dspec.is_ball:
        raise UnsupportedDomainError("the radial solver only handles balls")
    if dspec.n != grid.n or not np.isclose(dspec.radius, grid.R):
        raise GridError("grid dimension/radius do not match the domain")
    d, e = stiffness(grid)
    psi = sample_potential(grid, dspec, pspec)
    return DiscreteOperator(grid, dspec, pspec, d, e, psi, grid.quad_weights.copy())


class H1Norm(NamedTuple):
    value: float
    empty: bool


def annulus_mask(grid, rho, delta):
    return (grid.nodes > rho) & (grid.nodes < (1.0 - delta) * grid.R)


def h1_norm_annulus(grid, u, rho, delta):
    """H^1 norm of a radial function over {rho < |x| < (1-delta) R}.

    Restricts the lumped quadrature to nodes inside the window and uses
    centered difference quotients for u'.  An empty window gives
    ``H1Norm(0.0, empty=True)``.
    """
    if rho >= (1.0 - delta) * grid.R:
        return H1Norm(0.0, True)
    mask = annulus_mask(grid, rho, delta)
    if not np.any(mask):
        return H1Norm(0.0, True)
    u = np.asarray(u, dtype=float)
    g = grid.gradient(u)
    s = grid.quad_weights[mask] @ (u[mask] ** 2 + g[mask] ** 2)
    return H1Norm(float(np.sqrt(sphere_area(grid.n) * s)), False)


def write_grid_csv(path, grid, dspec, pspec):
    psi = sample_potential(grid, dspec, pspec)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "psi", "mass_weight"])
        for r, p, m in zip(grid.nodes, psi, grid.quad_weights):
            w.writerow([repr(float(r)), repr(float(p)), repr(float(m))])
