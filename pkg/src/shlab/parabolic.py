"""Truncated and regularized heat flows u_t - Laplace u = mu Psi_* u + f on a ball.

Time stepping is the theta scheme on the lumped radial system

    (W + theta dt A) u^{k+1} = (W - (1-theta) dt A) u^k + dt W f^k,
    A = K - mu diag(W psi),

with backward Euler (theta = 1) as the default.  For backward Euler the
implicit matrix is a Stieltjes matrix whenever it is positive definite, so
nonnegative data stay nonnegative and the solutions are ordered like the
potentials.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .discretize import assemble, build_grid
from .domain import DomainSpec, PotentialSpec, hardy_constant, inf_potential, sphere_area
from .errors import NotPositiveDefinite, PreconditionError, TimeStepError

log = logging.getLogger(__name__)

DEFAULT_M = 2000
MAX_HALVINGS = 20


@dataclass
class HeatRunConfig:
    dspec: DomainSpec
    potential: PotentialSpec  # truncated(N) or regularized(eps); carries mu
    T: float
    dt: float | None = None  # default T/1000
    u0: object = "ones"  # "ones", nodal array, or callable r -> u0(r)
    forcing: object = None  # None, nodal array (constant in time), or callable (t, r) -> f
    grid: object = None
    theta: float = 1.0
    store_states: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise PreconditionError("T must be positive")
        if self.dt is None:
            self.dt = self.T / 1000.0
        if not (self.dt > 0 and self.T >= self.dt):
            raise PreconditionError("need 0 < dt <= T")
        if not 0.5 <= self.theta <= 1.0:
            raise PreconditionError("theta must lie in [1/2, 1]")
        if self.grid is None:
            self.grid = build_grid(self.dspec.n, self.dspec.radius, DEFAULT_M)

    @property
    def mu(self):
        return self.potential.mu


@dataclass
class EnergyTrace:
    times: np.ndarray
    l2_sq: np.ndarray
    dissipation: np.ndarray
    potential_work: np.ndarray
    forcing_work: np.ndarray
    # per-level integrands: int |grad u|^2, int psi u^2, int f u
    grad_sq: np.ndarray = field(repr=False, default=None)
    potential_sq: np.ndarray = field(repr=False, default=None)
    forcing_dot: np.ndarray = field(repr=False, default=None)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "l2_sq", "dissipation", "potential_work", "forcing_work"])
            for row in zip(self.times, self.l2_sq, self.dissipation, self.potential_work, self.forcing_work):
                w.writerow([repr(float(x)) for x in row])


@dataclass
class HeatResult:
    trace: EnergyTrace
    u: np.ndarray
    grid: object
    op: object
    dt: float
    steps: int
    blowup: bool
    states: np.ndarray | None = None
    forcing_table: np.ndarray | None = field(default=None, repr=False)

    @property
    def final_l2_sq(self):
        return float("inf") if self.blowup else float(self.trace.l2_sq[-1])


def _initial(u0, grid):
    if isinstance(u0, str):
        if u0 == "ones":
            return np.ones(grid.M)
        if u0 == "zeros":
            return np.zeros(grid.M)
        raise PreconditionError(f"unknown initial datum {u0!r}")
    if callable(u0):
        return np.asarray(u0(grid.nodes), dtype=float)
    u = np.asarray(u0, dtype=float)
    if u.shape != (grid.M,) or not np.all(np.isfinite(u)):
        raise PreconditionError("u0 must be a finite nodal vector")
    return u


def _forcing_table(forcing, grid, dt, nsteps):
    if forcing is None:
        return None
    if callable(forcing):
        t = dt * np.arange(nsteps)
        return np.array([np.broadcast_to(forcing(tk, grid.nodes), (grid.M,)) for tk in t], dtype=float)
    f = np.asarray(forcing, dtype=float)
    if f.shape == (grid.M,):
        return np.broadcast_to(f, (nsteps, grid.M)).copy()
    if f.shape == (nsteps, grid.M):
        return f
    raise PreconditionError("forcing must be callable, a nodal vector, or an (nsteps, M) table")


def _accumulate(y, dt, theta):
    # time quadrature matching the scheme: theta on the new level, 1-theta on
    # the old one, so backward Euler never weights the (possibly incompatible)
    # initial datum and the discrete energy identity holds exactly
    out = np.zeros_like(y)
    out[1:] = np.cumsum(dt * (theta * y[1:] + (1.0 - theta) * y[:-1]))
    return out


def run_heat(cfg):
    """Integrate the configured heat flow and return its energy trace.

    The step is halved (up to 20 times) when the implicit matrix is not
    positive definite; past that a :class:`TimeStepError` is raised.
    """
    grid = cfg.grid
    op = assemble(grid, cfg.dspec, cfg.potential)
    u0 = _initial(cfg.u0, grid)
    a, e = op.diag, op.off
    w = op.mass_diag
    wp = op.mass_diag * op.potential_diag
    dt = cfg.dt
    for _ in range(MAX_HALVINGS + 1):
        nsteps = int(round(cfg.T / dt))
        ftab = _forcing_table(cfg.forcing, grid, dt, nsteps)
        try:
            out = _kernels.heat_march(
                w + cfg.theta * dt * a, cfg.theta * dt * e, a, e, cfg.theta,
                op.stiff_diag, op.stiff_off, w, wp, ftab, u0, dt, nsteps,
                cfg.store_states,
            )
            break
        except NotPositiveDefinite:
            log.info("implicit matrix indefinite at dt=%g; halving", dt)
            dt *= 0.5
    else:
        raise TimeStepError(
            f"implicit matrix not positive definite even at dt={dt:g}; use a smaller step"
        )

    omega = sphere_area(grid.n)
    times = dt * np.arange(nsteps + 1)
    done = out["steps_done"]
    grad = omega * out["grad"]
    pot = omega * out["pot"]
    forc = omega * out["forc"]
    trace = EnergyTrace(
        times[: done + 1],
        omega * out["l2"][: done + 1],
        _accumulate(grad[: done + 1], dt, cfg.theta),
        _accumulate(pot[: done + 1], dt, cfg.theta),
        _accumulate(forc[: done + 1], dt, cfg.theta),
        grad[: done + 1], pot[: done + 1], forc[: done + 1],
    )
    if out["blowup"]:
        log.warning("blow-up suspected after %d of %d steps", done, nsteps)
    states = None if out["states"] is None else out["states"][: done + 1]
    return HeatResult(trace, out["u"], grid, op, dt, done, out["blowup"], states, ftab)


def energy_estimate(dspec, mu, u0_l2_sq, forcing_l2_sq=0.0, trace=None):
    """Both sides of the subcritical energy estimate.

    lhs = ||u(T)||^2 + (C - mu)/(2C) int int |grad u|^2
    rhs = ||u0||^2 + int int f^2 / (2 m (C - mu))

    with C = ((n-2)/2)^2 and m the infimum of the exact potential.  ``lhs``
    is None unless a trace is given.
    """
    C = hardy_constant(dspec.n)
    if not mu < C:
        raise PreconditionError(f"energy estimate needs mu < {C:g}")
    m = inf_potential(dspec)
    rhs = u0_l2_sq + forcing_l2_sq / (2.0 * m * (C - mu))
    lhs = None
    if trace is not None:
        lhs = trace.l2_sq[-1] + (C - mu) / (2.0 * C) * trace.dissipation[-1]
    return lhs, rhs


def forcing_l2_sq(result):
    """int_0^T int f^2 for the piecewise-constant forcing of a run."""
    if result.forcing_table is None:
        return 0.0
    w = result.grid.quad_weights
    per_step = sphere_area(result.grid.n) * (result.forcing_table ** 2 @ w)
    return float(result.dt * per_step[: result.steps].sum())


@dataclass
class BlowupTable:
    mu: float
    n: int
    T: float
    dt: float
    N: list
    final_l2_sq: list
    status: list
    monotone: bool
    growth_ratio: float
    growth_factor: float
    pointwise_monotone: bool | None = None
    positive: bool | None = None

    @property
    def unbounded_trend(self):
        return self.growth_ratio > self.growth_factor

    def header(self):
        n = self.n
        return {
            "mu": self.mu, "n": n, "T": self.T, "dt": self.dt,
            "hardy_threshold": hardy_constant(n),
            "stated_global_existence_threshold": ((n - 2) / n) ** 2,
            "supercritical": self.mu > hardy_constant(n),
            "monotone_in_N": self.monotone,
            "pointwise_monotone": self.pointwise_monotone,
            "positive": self.positive,
            "growth_ratio": self.growth_ratio,
            "growth_factor": self.growth_factor,
            "unbounded_trend": self.unbounded_trend,
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "final_l2_sq", "status"])
            for N, v, s in zip(self.N, self.final_l2_sq, self.status):
                w.writerow([repr(float(N)), repr(float(v)), s])

    def write_json(self, path):
        rows = [{"N": N, "final_l2_sq": v if np.isfinite(v) else "inf", "status": s}
                for N, v, s in zip(self.N, self.final_l2_sq, self.status)]
        with open(path, "w") as fh:
            json.dump({"header": self.header(), "rows": rows}, fh, indent=2, sort_keys=True)


def blowup_scan(dspec, mu, u0="ones", N_list=(10.0, 100.0, 1000.0), T=0.5, dt=None,
                grid=None, growth_factor=100.0, forcing=None, check_pointwise=False):
    """Run the truncated flow for increasing N and tabulate the final L^2 norms.

    For mu above the Hardy threshold the family grows without bound in N;
    for subcritical mu it stays below the energy estimate.  Overflowing runs
    are recorded as +inf.  With ``check_pointwise`` every node of every step
    is compared across consecutive N.
    """
    N_list = [float(N) for N in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise PreconditionError("N_list must be strictly increasing")
    grid = grid if grid is not None else build_grid(dspec.n, dspec.radius, DEFAULT_M)
    u0v = _initial(u0, grid)
    if np.any(u0v < 0):
        raise PreconditionError("u0 must be nonnegative")
    finals, status = [], []
    prev = None
    pointwise = True if check_pointwise else None
    positive = True if check_pointwise else None
    used_dt = dt
    for N in N_list:
        cfg = HeatRunConfig(dspec, PotentialSpec.truncated(N, mu), T, dt, u0v, forcing, grid,
                            store_states=check_pointwise)
        res = run_heat(cfg)
        used_dt = res.dt
        finals.append(res.final_l2_sq)
        status.append("blow-up suspected" if res.blowup else "ok")
        if check_pointwise and not res.blowup:
            if np.any(u0v > 0):
                positive = positive and bool(np.all(res.states[1:] > 0))
            if prev is not None and prev.shape == res.states.shape:
                pointwise = pointwise and bool(np.all(res.states >= prev))
            prev = res.states
    monotone = all(b >= a for a, b in zip(finals, finals[1:]))
    first, last = finals[0], finals[-1]
    if first > 0:
        ratio = last / first
    else:
        ratio = 1.0 if last == 0 else float("inf")
    return BlowupTable(float(mu), dspec.n, float(T), float(used_dt if used_dt else T / 1000.0),
                       N_list, finals, status, monotone, float(ratio), float(growth_factor),
                       pointwise, positive)
