"""Priors, empirical measures, and kernel density estimation.

Analytic priors (lognormal, normal, bivariate Gaussian, uniform disk) expose
pdf/cdf/sampling plus truncated moments ``mass/mean/sqmean between`` used by
the closed-form transport solvers.  A discrete-atom prior with the same
surface lets those solvers run on empirical data.

Sampling uses numpy's PCG64 generator seeded explicitly, so identical
(spec, n, seed) triples produce bit-identical output across runs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    DomainError,
    EmptyMeasure,
    Unsupported,
)
from .numerics import QuadratureRule, integrate

__all__ = [
    "Lognormal",
    "Normal1D",
    "Gaussian2D",
    "UniformDisk",
    "DiscreteAtoms",
    "PriorSpec",
    "EmpiricalMeasure",
    "KdeModel",
    "sample",
    "pdf",
    "cdf",
    "partial_expectation",
    "kde_bandwidth",
    "kde_density",
    "empirical_expectation",
    "read_samples_csv",
    "write_samples_csv",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * np.asarray(z) ** 2) / _SQRT2PI


@dataclass(frozen=True)
class Normal1D:
    mu: float
    sigma: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def support(self):
        return (-math.inf, math.inf)

    def pdf(self, x):
        return _phi((np.asarray(x) - self.mu) / self.sigma) / self.sigma

    def cdf(self, x):
        return ndtr((np.asarray(x) - self.mu) / self.sigma)

    def quantile(self, q):
        return self.mu + self.sigma * ndtri(q)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return (self.mu + self.sigma * rng.standard_normal(n)).reshape(n, 1)

    def mass_between(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        a = (lo - self.mu) / self.sigma
        b = (hi - self.mu) / self.sigma
        return float(ndtr(b) - ndtr(a))

    def mean_between(self, lo: float, hi: float) -> float:
        """Integral of x dP over (lo, hi)."""
        if hi <= lo:
            return 0.0
        a = (lo - self.mu) / self.sigma
        b = (hi - self.mu) / self.sigma
        mass = float(ndtr(b) - ndtr(a))
        pa = float(_phi(a)) if math.isfinite(a) else 0.0
        pb = float(_phi(b)) if math.isfinite(b) else 0.0
        return self.mu * mass + self.sigma * (pa - pb)

    def sqmean_between(self, lo: float, hi: float) -> float:
        """Integral of x^2 dP over (lo, hi)."""
        if hi <= lo:
            return 0.0
        a = (lo - self.mu) / self.sigma
        b = (hi - self.mu) / self.sigma
        mass = float(ndtr(b) - ndtr(a))
        pa = float(_phi(a)) if math.isfinite(a) else 0.0
        pb = float(_phi(b)) if math.isfinite(b) else 0.0
        ez1 = pa - pb
        apa = float(a * _phi(a)) if math.isfinite(a) else 0.0
        bpb = float(b * _phi(b)) if math.isfinite(b) else 0.0
        ez2 = mass + apa - bpb
        return self.mu**2 * mass + 2 * self.mu * self.sigma * ez1 + self.sigma**2 * ez2

    def expectation(self, g, lo: float, hi: float, rule: QuadratureRule | None = None) -> float:
        """Quadrature of g(x) dP over (lo, hi), clipped to the effective support."""
        lo = max(lo, self.mu - 13 * self.sigma)
        hi = min(hi, self.mu + 13 * self.sigma)
        if hi <= lo:
            return 0.0
        return integrate(lambda x: np.asarray(g(x)) * self.pdf(x), lo, hi, rule)


@dataclass(frozen=True)
class Lognormal:
    """exp(N(mu, sigma^2)); the price-scale prior of the case study."""

    mu: float
    sigma: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def support(self):
        return (0.0, math.inf)

    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        pos = x > 0
        z = (np.log(x[pos]) - self.mu) / self.sigma
        out[pos] = _phi(z) / (x[pos] * self.sigma)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        pos = x > 0
        out[pos] = ndtr((np.log(x[pos]) - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def quantile(self, q):
        return np.exp(self.mu + self.sigma * ndtri(q))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.exp(self.mu + self.sigma * rng.standard_normal(n)).reshape(n, 1)

    def _power_mass(self, k: int, lo: float, hi: float) -> float:
        """Integral of x^k dP over (lo, hi) via the tilted-normal identity."""
        if hi <= lo:
            return 0.0
        scale = math.exp(k * self.mu + 0.5 * (k * self.sigma) ** 2)
        lo = max(lo, 0.0)

        def tail(a):
            if a <= 0.0:
                return 1.0
            return float(ndtr((self.mu + k * self.sigma**2 - math.log(a)) / self.sigma))

        return scale * (tail(lo) - (tail(hi) if math.isfinite(hi) else 0.0))

    def mass_between(self, lo: float, hi: float) -> float:
        return self._power_mass(0, lo, hi)

    def mean_between(self, lo: float, hi: float) -> float:
        return self._power_mass(1, lo, hi)

    def sqmean_between(self, lo: float, hi: float) -> float:
        return self._power_mass(2, lo, hi)

    def expectation(self, g, lo: float, hi: float, rule: QuadratureRule | None = None) -> float:
        """Quadrature of g(x) dP over (lo, hi), performed on the log scale."""
        u_lo = math.log(lo) if lo > 0 else self.mu - 13 * self.sigma
        u_hi = math.log(hi) if math.isfinite(hi) else self.mu + 13 * self.sigma
        u_lo = max(u_lo, self.mu - 13 * self.sigma)
        u_hi = min(u_hi, self.mu + 13 * self.sigma)
        if u_hi <= u_lo:
            return 0.0

        def integrand(u):
            x = np.exp(u)
            z = (u - self.mu) / self.sigma
            return np.asarray(g(x)) * _phi(z) / self.sigma

        return integrate(integrand, u_lo, u_hi, rule)


@dataclass(frozen=True)
class Gaussian2D:
    mean: tuple
    cov: tuple
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.cov, dtype=float)
        if m.shape != (2,) or c.shape != (2, 2):
            raise ValueError("mean must be length 2 and cov 2x2")
        if not np.allclose(c, c.T):
            raise ValueError("cov must be symmetric")
        if np.any(np.linalg.eigvalsh(c) <= 0):
            raise ValueError("cov must be positive definite")
        object.__setattr__(self, "mean", tuple(m))
        object.__setattr__(self, "cov", tuple(map(tuple, c)))

    def _arrays(self):
        return np.asarray(self.mean), np.asarray(self.cov)

    def pdf(self, x):
        m, c = self._arrays()
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = x - m
        cinv = np.linalg.inv(c)
        q = np.einsum("ni,ij,nj->n", diff, cinv, diff)
        det = np.linalg.det(c)
        out = np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))
        return out if out.shape[0] > 1 else float(out[0])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        m, c = self._arrays()
        chol = np.linalg.cholesky(c)
        z = rng.standard_normal((n, 2))
        return m + z @ chol.T


@dataclass(frozen=True)
class UniformDisk:
    radius: float
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.sum(x**2, axis=1) <= self.radius**2
        out = np.where(inside, 1.0 / (math.pi * self.radius**2), 0.0)
        return out if out.shape[0] > 1 else float(out[0])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        s = rng.uniform(0.0, 1.0, n)
        theta = rng.uniform(0.0, 2 * math.pi, n)
        r = self.radius * np.sqrt(s)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass(frozen=True)
class DiscreteAtoms:
    """Finite atomic measure on the line; same moment surface as the 1D priors.

    Interval conventions are lo-inclusive / hi-exclusive, matching the
    half-open pieces of the transport maps.
    """

    points: np.ndarray
    weights: np.ndarray
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.size == 0:
            raise EmptyMeasure("discrete prior needs at least one atom")
        if pts.shape != w.shape:
            raise ValueError("points and weights must have equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        order = np.argsort(pts, kind="stable")
        pts, w = pts[order], w[order]
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_cw", np.concatenate([[0.0], np.cumsum(w)]))
        object.__setattr__(self, "_cm1", np.concatenate([[0.0], np.cumsum(w * pts)]))
        object.__setattr__(self, "_cm2", np.concatenate([[0.0], np.cumsum(w * pts**2)]))

    @property
    def support(self):
        return (float(self.points[0]), float(self.points[-1]))

    def cdf(self, x):
        idx = np.searchsorted(self.points, np.asarray(x), side="right")
        return self._cw[idx]

    def _slice(self, cum, lo, hi):
        i = np.searchsorted(self.points, lo, side="left")
        j = np.searchsorted(self.points, hi, side="left")
        return float(cum[j] - cum[i])

    def mass_between(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        return self._slice(self._cw, lo, hi)

    def mean_between(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        return self._slice(self._cm1, lo, hi)

    def sqmean_between(self, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        return self._slice(self._cm2, lo, hi)

    def quantile(self, q):
        idx = np.searchsorted(self._cw[1:], q, side="left")
        idx = np.clip(idx, 0, self.points.size - 1)
        return self.points[idx]

    def expectation(self, g, lo: float, hi: float, rule=None) -> float:
        mask = (self.points >= lo) & (self.points < hi)
        if not np.any(mask):
            return 0.0
        return float(np.sum(self.weights[mask] * np.asarray(g(self.points[mask]))))


PriorSpec = Union[Lognormal, Normal1D, Gaussian2D, UniformDisk, DiscreteAtoms]
Prior1D = Union[Lognormal, Normal1D, DiscreteAtoms]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted sample points in 1 or 2 dimensions."""

    points: np.ndarray
    weights: np.ndarray | None = None
    seed: int | None = None
    origin: str = "external"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise DimensionMismatch(f"points must be (n, 1) or (n, 2), got {pts.shape}")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("sample coordinates must be finite")
        w = self.weights
        if w is None:
            n = pts.shape[0]
            w = np.full(n, 1.0 / n) if n else np.zeros(0)
        else:
            w = np.asarray(w, dtype=float).ravel()
            if w.shape[0] != pts.shape[0]:
                raise ValueError("weights length must match points")
            if pts.shape[0]:
                if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12 * max(1, w.size):
                    raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def x1(self) -> np.ndarray:
        """First coordinate as a flat vector (the whole sample in 1D)."""
        return self.points[:, 0]

    def with_points(self, points: np.ndarray) -> "EmpiricalMeasure":
        return EmpiricalMeasure(points=points, weights=self.weights, seed=self.seed, origin=self.origin)

    def as_discrete_prior(self) -> DiscreteAtoms:
        if self.dim != 1:
            raise DimensionMismatch("discrete prior conversion requires 1D samples")
        if self.n == 0:
            raise EmptyMeasure("empty measure")
        return DiscreteAtoms(points=self.x1(), weights=self.weights)


def sample(spec: PriorSpec, n: int, seed: int) -> EmpiricalMeasure:
    """Draw n points from the prior; deterministic in (spec, n, seed)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    dim = spec.dim
    if n == 0:
        return EmpiricalMeasure(points=np.zeros((0, dim)), seed=seed, origin=_origin_tag(spec))
    rng = np.random.default_rng(seed)
    pts = spec.sample(n, rng)
    return EmpiricalMeasure(points=pts, seed=seed, origin=_origin_tag(spec))


def _origin_tag(spec: PriorSpec) -> str:
    return type(spec).__name__


def pdf(spec: PriorSpec, x) -> float:
    return spec.pdf(x)


def cdf(spec: PriorSpec, x) -> float:
    if spec.dim != 1:
        raise Unsupported("cdf is defined for 1D priors only")
    return spec.cdf(x)


def partial_expectation(spec: Lognormal, a: float) -> float:
    """E[X 1{X >= a}] for a lognormal prior, in closed form."""
    if not isinstance(spec, Lognormal):
        raise Unsupported("partial_expectation requires a lognormal prior")
    if a <= 0:
        return spec.mean()
    if math.isinf(a):
        return 0.0
    return spec.mean() * float(ndtr((spec.mu + spec.sigma**2 - math.log(a)) / spec.sigma))


def kde_bandwidth(samples: EmpiricalMeasure) -> float:
    """Silverman's rule h = sigma_hat * (4 / ((d+2) n))^(1/(d+4)).

    sigma_hat is the mean of the per-dimension sample standard deviations
    (ddof=1).
    """
    n, d = samples.n, samples.dim
    if n < 2:
        raise DegenerateSample("bandwidth needs at least two samples")
    sigma = float(np.mean(np.std(samples.points, axis=0, ddof=1)))
    if sigma <= 0:
        raise DegenerateSample("bandwidth needs nonzero sample spread")
    return sigma * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


@dataclass(frozen=True)
class KdeModel:
    """Gaussian-kernel density with fixed bandwidth over sample centers."""

    centers: EmpiricalMeasure
    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.centers.n == 0:
            raise EmptyMeasure("KDE needs at least one center")


def kde_density(model: KdeModel, query) -> float | np.ndarray:
    """Density at query point(s): sum_j w_j (2 pi h^2)^(-d/2) exp(-|q-y_j|^2/2h^2)."""
    pts = model.centers.points
    w = model.centers.weights
    h = model.bandwidth
    d = model.centers.dim
    q = np.asarray(query, dtype=float)
    scalar = q.ndim <= 1
    q2 = np.atleast_2d(q)
    if q2.shape[1] != d:
        if q2.shape[0] == d and q2.shape[1] != d:
            q2 = q2.T
        else:
            raise DimensionMismatch(f"query dim {q2.shape[1]} != model dim {d}")
    norm = (2 * math.pi * h * h) ** (-0.5 * d)
    sq = np.sum((q2[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    dens = norm * np.sum(w[None, :] * np.exp(-0.5 * sq / (h * h)), axis=1)
    return float(dens[0]) if scalar and dens.size == 1 else dens


def empirical_expectation(m: EmpiricalMeasure, f: Callable) -> float:
    """Weighted mean of f over the sample points."""
    if m.n == 0:
        raise EmptyMeasure("expectation of an empty measure")
    pts = m.points if m.dim == 2 else m.x1()
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != (m.n,):
            raise ValueError
    except (TypeError, ValueError):
        vals = np.asarray([float(f(p)) for p in pts], dtype=float)
    return float(np.dot(m.weights, vals))


def write_samples_csv(m: EmpiricalMeasure, path) -> None:
    header = ["x1"] if m.dim == 1 else ["x1", "x2"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in m.points:
            writer.writerow([repr(float(v)) for v in row])


def read_samples_csv(path) -> EmpiricalMeasure:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != "x1":
            raise ValueError(f"{path}: expected header 'x1[,x2]'")
        rows = [tuple(float(v) for v in row) for row in reader if row]
    dim = len(header)
    pts = np.asarray(rows, dtype=float).reshape(-1, dim) if rows else np.zeros((0, dim))
    return EmpiricalMeasure(points=pts, origin="external")
