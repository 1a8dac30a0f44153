"""Star-shaped domains {|x| < phi(x)} and the inverse-square potential family.

The gauge ``phi`` is 0-homogeneous: it only sees the direction x/|x|.  A ball
is the constant gauge; a :class:`DirectionTable` tabulates phi on the unit
sphere of R^3 and interpolates linearly in (polar, azimuth).

Potential variants, with s = |x|^(n-2) phi(x)^(2-n):

* ``exact``       |x|^-2 (1 - s)^-2
* ``as-printed``  |x|^-2 (1 - s)            (unsquared, uninverted bracket)
* ``truncated``   min(N, exact)
* ``regularized`` (|x| + eps)^-2 (1 + eps - s)^-2
* ``classical``   |x|^-2
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, PreconditionError, SingularityError, UnsupportedDomainError

VARIANTS = ("exact", "as-printed", "truncated", "regularized", "classical")


def hardy_constant(n):
    """Optimal Hardy constant ((n-2)/2)^2."""
    return ((n - 2) / 2.0) ** 2


def sphere_area(n):
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class BallRadius:
    R: float

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise DomainError(f"ball radius must be positive, got {self.R!r}")

    def to_dict(self):
        return {"kind": "ball", "R": float(self.R)}


@dataclass(frozen=True, eq=False)
class DirectionTable:
    """phi sampled on a (polar, azimuth) grid of the unit sphere in R^3.

    ``values[i, j]`` is phi at polar angle ``polar[i]`` and azimuth
    ``azimuth[j]``.  Azimuth is periodic with period 2*pi; polar must span
    [0, pi].
    """

    polar: np.ndarray
    azimuth: np.ndarray
    values: np.ndarray
    lipschitz: float = field(init=False)

    def __post_init__(self):
        polar = np.asarray(self.polar, dtype=float)
        azimuth = np.asarray(self.azimuth, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (polar.size, azimuth.size):
            raise DomainError("values must have shape (len(polar), len(azimuth))")
        if polar.size < 2 or azimuth.size < 1:
            raise DomainError("direction table needs at least 2 polar and 1 azimuth sample")
        if np.any(np.diff(polar) <= 0) or polar[0] != 0.0 or not np.isclose(polar[-1], np.pi):
            raise DomainError("polar samples must increase strictly from 0 to pi")
        if np.any(np.diff(azimuth) <= 0) or azimuth[0] < 0 or azimuth[-1] >= 2 * np.pi:
            raise DomainError("azimuth samples must increase strictly within [0, 2*pi)")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("phi samples must be finite and strictly positive")
        object.__setattr__(self, "polar", polar)
        object.__setattr__(self, "azimuth", azimuth)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lipschitz", _table_lipschitz(polar, azimuth, values))

    def _interpolator(self):
        az = np.concatenate([self.azimuth, [self.azimuth[0] + 2 * np.pi]])
        vals = np.concatenate([self.values, self.values[:, :1]], axis=1)
        if self.azimuth[0] > 0:
            az = np.concatenate([[self.azimuth[-1] - 2 * np.pi], az])
            vals = np.concatenate([self.values[:, -1:], vals], axis=1)
        return RegularGridInterpolator((self.polar, az), vals, method="linear")

    def __call__(self, direction):
        d = np.asarray(direction, dtype=float)
        polar = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        azim = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2 * np.pi)
        lo = self.azimuth[0]
        azim = np.where(azim < lo, azim + 2 * np.pi, azim) if lo > 0 else azim
        pts = np.stack([polar, azim], axis=-1)
        return self._interpolator()(pts)

    def to_dict(self):
        return {
            "kind": "table",
            "polar": self.polar.tolist(),
            "azimuth": self.azimuth.tolist(),
            "values": self.values.tolist(),
        }


def _table_lipschitz(polar, azimuth, values):
    # slope bound in angle along both table directions
    slopes = [0.0]
    if polar.size > 1:
        slopes.append(np.max(np.abs(np.diff(values, axis=0)) / np.diff(polar)[:, None]))
    if azimuth.size > 1:
        gaps = np.diff(np.concatenate([azimuth, [azimuth[0] + 2 * np.pi]]))
        dv = np.abs(np.diff(np.concatenate([values, values[:, :1]], axis=1), axis=1))
        sin_polar = np.maximum(np.sin(polar), 1e-12)[:, None]
        slopes.append(np.max(dv / (gaps[None, :] * sin_polar)))
    return float(max(slopes))


@dataclass(frozen=True, eq=False)
class DomainSpec:
    n: int
    gauge: BallRadius | DirectionTable

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"dimension must be an integer >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if isinstance(self.gauge, DirectionTable) and self.n != 3:
            raise DomainError("direction tables are only defined on the sphere of R^3")

    @classmethod
    def ball(cls, n, R=1.0):
        return cls(n, BallRadius(float(R)))

    @property
    def is_ball(self):
        return isinstance(self.gauge, BallRadius)

    @property
    def radius(self):
        """Ball radius; raises for non-ball gauges."""
        if not self.is_ball:
            raise UnsupportedDomainError("solvers only support ball domains")
        return self.gauge.R

    def to_dict(self):
        return {"n": self.n, "gauge": self.gauge.to_dict()}

    @classmethod
    def from_dict(cls, d):
        g = d.get("gauge", {"kind": "ball", "R": 1.0})
        if isinstance(g, (int, float)):
            gauge = BallRadius(float(g))
        elif g.get("kind") == "ball":
            gauge = BallRadius(float(g["R"]))
        elif g.get("kind") == "table":
            gauge = DirectionTable(g["polar"], g["azimuth"], g["values"])
        else:
            raise DomainError(f"unknown gauge {g!r}")
        return cls(int(d["n"]), gauge)


@dataclass(frozen=True)
class PotentialSpec:
    variant: str = "exact"
    mu: float = 0.0
    N: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown potential variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "truncated" and not (self.N is not None and self.N > 0):
            raise DomainError("truncated potential needs N > 0")
        if self.variant == "regularized" and not (self.eps is not None and self.eps > 0):
            raise DomainError("regularized potential needs eps > 0")
        if not np.isfinite(self.mu):
            raise DomainError("mu must be finite")

    @classmethod
    def exact(cls, mu=0.0):
        return cls("exact", mu)

    @classmethod
    def truncated(cls, N, mu=0.0):
        return cls("truncated", mu, N=float(N))

    @classmethod
    def regularized(cls, eps, mu=0.0):
        return cls("regularized", mu, eps=float(eps))

    @classmethod
    def classical(cls, mu=0.0):
        return cls("classical", mu)

    def with_mu(self, mu):
        return PotentialSpec(self.variant, float(mu), self.N, self.eps)

    def to_dict(self):
        d = {"variant": self.variant, "mu": float(self.mu)}
        if self.N is not None:
            d["N"] = float(self.N)
        if self.eps is not None:
            d["eps"] = float(self.eps)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            d.get("variant", "exact"),
            float(d.get("mu", 0.0)),
            None if d.get("N") is None else float(d["N"]),
            None if d.get("eps") is None else float(d["eps"]),
        )


def eval_phi(spec, x):
    """Gauge value phi(x/|x|) at one point or an array of points (last axis = n)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise DomainError(f"points must have {spec.n} coordinates")
    if isinstance(spec.gauge, BallRadius):
        out = np.full(x.shape[:-1], spec.gauge.R)
    else:
        norm = np.linalg.norm(x, axis=-1)
        if np.any(norm == 0):
            raise DomainError("direction undefined at the origin")
        out = spec.gauge(x / norm[..., None])
    return float(out) if out.ndim == 0 else out


def _one_minus_power(ratio, dist_ratio, k):
    """1 - ratio**k, accurate near ratio = 1 when ``dist_ratio = 1 - ratio`` is given."""
    if dist_ratio is None:
        return 1.0 - ratio ** k
    return -np.expm1(k * np.log1p(-dist_ratio))


def radial_profile(n, R, pspec, r, dist=None):
    """Potential along a ray with gauge value ``R``.

    ``dist`` (= R - r) may be supplied to keep full precision next to the
    boundary where R - r underflows relative to R.
    """
    r = np.asarray(r, dtype=float)
    k = n - 2
    dr = None if dist is None else np.asarray(dist, dtype=float) / R
    v = pspec.variant
    with np.errstate(divide="ignore", invalid="ignore"):
        if v == "classical":
            if np.any(r <= 0):
                raise SingularityError("classical potential is singular at the origin")
            return r ** -2.0
        if v == "regularized":
            eps = pspec.eps
            return (r + eps) ** -2.0 * (eps + _one_minus_power(r / R, dr, k)) ** -2.0
        bracket = _one_minus_power(r / R, dr, k)
        if v in ("exact", "as-printed"):
            if np.any(r <= 0) or np.any(bracket <= 0):
                raise SingularityError(
                    f"{v} potential is singular at the origin and on the boundary"
                )
            if v == "as-printed":
                return r ** -2.0 * bracket
            return r ** -2.0 * bracket ** -2.0
        # truncated: min(N, exact) with exact = +inf on the singular set
        exact = np.where((r <= 0) | (bracket <= 0), np.inf, r ** -2.0 * bracket ** -2.0)
        return np.minimum(pspec.N, exact)


def eval_potential(dspec, pspec, r=None, *, x=None, dist=None):
    """Evaluate the selected potential at radii ``r`` (ball) or points ``x``.

    Exactly one of ``r`` and ``x`` must be given.  Returns a float for scalar
    input, otherwise an array.
    """
    if (r is None) == (x is None):
        raise TypeError("pass exactly one of r or x")
    if x is not None:
        x = np.asarray(x, dtype=float)
        rad = np.linalg.norm(x, axis=-1)
        if dspec.is_ball:
            R = dspec.gauge.R
        else:
            if np.any(rad == 0) and pspec.variant in ("exact", "as-printed", "classical"):
                raise SingularityError("potential is singular at the origin")
            safe = np.where(rad[..., None] == 0, np.eye(dspec.n)[0], x)
            R = eval_phi(dspec, safe)
        out = radial_profile(dspec.n, R, pspec, rad)
    else:
        R = dspec.radius
        if np.any(np.asarray(r) > R) or (dist is not None and np.any(np.asarray(dist) < 0)):
            raise DomainError("radius outside the closed domain")
        out = radial_profile(dspec.n, R, pspec, r, dist)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def inf_potential(dspec, pspec=None):
    """Infimum m of the exact potential over the domain.

    Along a ray with gauge value R the minimum sits at
    r* = R (n-1)^(-1/(n-2)) and equals m_1 / R^2, so the global infimum is
    attained on the ray with the largest gauge.  For direction tables the
    maximum is taken over the table samples and a warning is issued.
    """
    if pspec is not None and pspec.variant != "exact":
        raise PreconditionError("inf_potential is defined for the exact potential")
    n = dspec.n
    s = (1.0 / (n - 1)) ** (1.0 / (n - 2))
    m_unit = 1.0 / (s * s * (1.0 - 1.0 / (n - 1)) ** 2)
    if dspec.is_ball:
        return m_unit / dspec.gauge.R ** 2
    warnings.warn("inf_potential on a non-ball gauge is computed from table samples", stacklevel=2)
    return m_unit / float(np.max(dspec.gauge.values)) ** 2


def argmin_potential(dspec):
    """Radius where the exact potential attains its infimum on a ball."""
    n = dspec.n
    return dspec.radius * (1.0 / (n - 1)) ** (1.0 / (n - 2))
