"""Discrete Hardy constants for the double-singular and inverse-square weights.

The discrete best constant is the smallest sigma with K v = sigma diag(w psi) v,
i.e. the minimum of the Rayleigh quotient u^T K u / sum(w psi u^2) over nodal
vectors.  Refining the grid (more nodes, first node closer to the singular
set) drives it toward ((n-2)/2)^2 from above.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .discretize import assemble, boundary_conductance, build_grid, sample_potential, stiffness, DEFAULT_Q
from .domain import DomainSpec, PotentialSpec, hardy_constant
from .errors import PreconditionError
from .spectral import lowest_pencil

# (nodes, first spacing / R) per refinement level
DEFAULT_LEVELS = ((1000, 1e-8), (2000, 1e-12), (4000, 1e-16))

_WEIGHTS = {"double-singular": "exact", "classical": "classical"}


def weight_spec(variant):
    """PotentialSpec used as Hardy weight; accepts a name or a PotentialSpec."""
    if isinstance(variant, PotentialSpec):
        return variant
    try:
        return PotentialSpec(_WEIGHTS[variant], 1.0)
    except KeyError:
        raise PreconditionError(f"unknown Hardy variant {variant!r}") from None


def rayleigh_quotient(grid, dspec, variant, u):
    """int |grad u|^2 / int psi u^2 on the grid (sphere area cancels)."""
    u = np.asarray(u, dtype=float)
    psi = sample_potential(grid, dspec, weight_spec(variant))
    den = grid.quad_weights @ (psi * u * u)
    if not den > 0:
        raise PreconditionError("u vanishes identically; the quotient is undefined")
    _, e = stiffness(grid)
    num = -e @ np.diff(u) ** 2 + boundary_conductance(grid) * u[-1] ** 2
    return float(num / den)


@dataclass
class HardyMinimizer:
    constant: float
    vector: np.ndarray


def hardy_minimizer(grid, dspec, variant):
    op = assemble(grid, dspec, weight_spec(variant))
    rs = np.zeros(grid.M)
    rs[-1] = boundary_conductance(grid)
    eig = lowest_pencil(op.stiff_diag, op.stiff_off, op.mass_diag * op.potential_diag, row_sums=rs)
    return HardyMinimizer(eig.value, eig.vector)


def discrete_hardy_constant(grid, dspec, variant):
    if not dspec.is_ball:
        raise PreconditionError("Hardy constants are computed on balls only")
    return hardy_minimizer(grid, dspec, variant).constant


def singular_mass_fraction(grid, dspec, variant, u, inner=0.1, outer=0.9):
    """Share of int psi u^2 carried by nodes with r < inner*R or r > outer*R."""
    psi = sample_potential(grid, dspec, weight_spec(variant))
    dens = grid.quad_weights * psi * np.asarray(u, dtype=float) ** 2
    r = grid.nodes / grid.R
    near = (r < inner) | (r > outer)
    return float(dens[near].sum() / dens.sum())


@dataclass
class HardyReport:
    n: int
    variant: str
    target: float
    sizes: list = field(default_factory=list)
    h_mins: list = field(default_factory=list)
    constants: list = field(default_factory=list)
    singular_fractions: list = field(default_factory=list)

    @property
    def gaps(self):
        return [c - self.target for c in self.constants]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["M", "discrete_constant", "target", "gap"])
            for M, c in zip(self.sizes, self.constants):
                w.writerow([M, repr(float(c)), repr(float(self.target)), repr(float(c - self.target))])

    def to_dict(self):
        return {
            "n": self.n, "variant": self.variant, "target": self.target,
            "levels": [
                {"M": M, "h_min": h, "discrete_constant": c, "singular_fraction": f}
                for M, h, c, f in zip(self.sizes, self.h_mins, self.constants, self.singular_fractions)
            ],
        }


def refinement_study(n, variant="double-singular", levels=DEFAULT_LEVELS, R=1.0, q=DEFAULT_Q):
    dspec = DomainSpec.ball(n, R)
    name = variant if isinstance(variant, str) else variant.variant
    rep = HardyReport(n, name, hardy_constant(n))
    for M, h in levels:
        grid = build_grid(n, R, M, "geometric", q=q, h_min=h * R)
        mini = hardy_minimizer(grid, dspec, variant)
        rep.sizes.append(M)
        rep.h_mins.append(h)
        rep.constants.append(mini.constant)
        rep.singular_fractions.append(singular_mass_fraction(grid, dspec, variant, mini.vector))
    return rep


def random_test_functions(grid, count=100, modes=6, seed=0):
    """Smooth radial test functions sum_k c_k cos((k - 1/2) pi r / R), c ~ N(0, 1/k^2).

    Each vanishes at r = R and is even in r, so it is smooth at the origin.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    basis = np.cos(np.outer(grid.nodes / grid.R, (k - 0.5) * np.pi))
    coef = rng.standard_normal((count, modes)) / k
    return coef @ basis.T
