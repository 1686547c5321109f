"""Expectation-constraint functions, their mollified versions, and targets.

Five constraint families: ramp payoffs (``Relu``), step functions
(``Heaviside``), and outside-indicators of an interval, a disk, and a
half-plane.  Regions are closed: a point on the boundary counts as inside,
so boundary atoms of the analytic solutions never violate an indicator
constraint.

Mollifiers: tanh walls for the step/indicator kinds, softplus for the ramp.
Arguments beyond |t|/eps > 40 return the exact limit values so no exp ever
overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, EmptyMeasure, Unsupported
from .measures import (
    DiscreteAtoms,
    EmpiricalMeasure,
    Gaussian2D,
    Lognormal,
    Normal1D,
    PriorSpec,
    UniformDisk,
    partial_expectation,
)
from .numerics import integrate

__all__ = [
    "Relu",
    "Heaviside",
    "IndicatorOutsideInterval",
    "IndicatorOutsideDisk",
    "IndicatorOutsideHalfplane",
    "ConstraintKind",
    "ConstraintSpec",
    "MollifiedConstraint",
    "evaluate",
    "evaluate_batch",
    "mollified",
    "mollified_batch",
    "residual",
    "target_from_surrogate",
]

_CLIP = 40.0


@dataclass(frozen=True)
class Relu:
    """max(y - omega, 0); a vanilla-call payoff at strike omega."""

    omega: float
    dim = 1


@dataclass(frozen=True)
class Heaviside:
    """1{y >= x0}."""

    x0: float
    dim = 1


@dataclass(frozen=True)
class IndicatorOutsideInterval:
    """1 outside the closed interval [a, b]."""

    a: float
    b: float
    dim = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("interval requires a < b")


@dataclass(frozen=True)
class IndicatorOutsideDisk:
    """1 outside the closed disk of given radius centered at the origin."""

    radius: float
    dim = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class IndicatorOutsideHalfplane:
    """1 on {z1 < threshold}; the allowed region is {z1 >= threshold}."""

    threshold: float
    dim = 2


ConstraintKind = Union[
    Relu, Heaviside, IndicatorOutsideInterval, IndicatorOutsideDisk, IndicatorOutsideHalfplane
]


@dataclass(frozen=True)
class ConstraintSpec:
    """One expectation constraint: kind, target value, penalty weight."""

    kind: ConstraintKind
    fbar: float
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("penalty weight must be >= 0")
        if isinstance(self.kind, Relu) and self.fbar < 0:
            raise ValueError("ramp constraint target must be >= 0")
        if not isinstance(self.kind, Relu) and not 0.0 <= self.fbar <= 1.0:
            raise ValueError("indicator/step targets must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return self.kind.dim


@dataclass(frozen=True)
class MollifiedConstraint:
    base: ConstraintSpec
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")


def _as_batch(kind: ConstraintKind, y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if kind.dim == 1:
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim > 1:
            raise DimensionMismatch(f"{type(kind).__name__} expects 1D points")
        return np.atleast_1d(arr)
    if arr.ndim == 1:
        if arr.shape[0] != 2:
            raise DimensionMismatch(f"{type(kind).__name__} expects 2D points")
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch(f"{type(kind).__name__} expects (n, 2) points")
    return arr


def evaluate_batch(spec: ConstraintSpec | ConstraintKind, y) -> np.ndarray:
    """Exact constraint values at a batch of points."""
    kind = spec.kind if isinstance(spec, ConstraintSpec) else spec
    arr = _as_batch(kind, y)
    if isinstance(kind, Relu):
        return np.maximum(arr - kind.omega, 0.0)
    if isinstance(kind, Heaviside):
        return (arr >= kind.x0).astype(float)
    if isinstance(kind, IndicatorOutsideInterval):
        return ((arr < kind.a) | (arr > kind.b)).astype(float)
    if isinstance(kind, IndicatorOutsideDisk):
        return (np.sum(arr**2, axis=1) > kind.radius**2).astype(float)
    if isinstance(kind, IndicatorOutsideHalfplane):
        return (arr[:, 0] < kind.threshold).astype(float)
    raise Unsupported(f"unknown constraint kind {kind!r}")


def evaluate(spec: ConstraintSpec | ConstraintKind, y) -> float:
    return float(evaluate_batch(spec, y)[0])


def _tanh_wall(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(value, d/dt) of 0.5*(tanh(t) + 1) with saturation beyond |t| > 40."""
    t = np.clip(t, -_CLIP, _CLIP)
    th = np.tanh(t)
    return 0.5 * (th + 1.0), 0.5 * (1.0 - th * th)


def mollified_batch(
    spec: ConstraintSpec | ConstraintKind, eps: float, y
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed constraint values and exact gradients of the smoothed form.

    Returns (values (n,), gradients (n, d)).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kind = spec.kind if isinstance(spec, ConstraintSpec) else spec
    arr = _as_batch(kind, y)
    if isinstance(kind, Relu):
        t = (arr - kind.omega) / eps
        val = np.where(
            t > _CLIP, arr - kind.omega, np.where(t < -_CLIP, 0.0, eps * np.log1p(np.exp(np.clip(t, -_CLIP, _CLIP))))
        )
        grad = np.where(t > _CLIP, 1.0, np.where(t < -_CLIP, 0.0, 1.0 / (1.0 + np.exp(-np.clip(t, -_CLIP, _CLIP)))))
        return val, grad.reshape(-1, 1)
    if isinstance(kind, Heaviside):
        v, dv = _tanh_wall((arr - kind.x0) / eps)
        return v, (dv / eps).reshape(-1, 1)
    if isinstance(kind, IndicatorOutsideInterval):
        v1, d1 = _tanh_wall((kind.a - arr) / eps)
        v2, d2 = _tanh_wall((arr - kind.b) / eps)
        return v1 + v2, ((d2 - d1) / eps).reshape(-1, 1)
    if isinstance(kind, IndicatorOutsideDisk):
        r2 = np.sum(arr**2, axis=1)
        v, dv = _tanh_wall((r2 - kind.radius**2) / eps)
        grad = (dv / eps)[:, None] * 2.0 * arr
        return v, grad
    if isinstance(kind, IndicatorOutsideHalfplane):
        v, dv = _tanh_wall((kind.threshold - arr[:, 0]) / eps)
        grad = np.zeros_like(arr)
        grad[:, 0] = -dv / eps
        return v, grad
    raise Unsupported(f"unknown constraint kind {kind!r}")


def mollified(spec: ConstraintSpec | ConstraintKind, eps: float, y) -> tuple[float, np.ndarray]:
    vals, grads = mollified_batch(spec, eps, y)
    return float(vals[0]), grads[0]


def region_smoother_batch(kind: ConstraintKind, eps: float, y) -> tuple[np.ndarray, np.ndarray]:
    """Mollified indicator of the *allowed* region (1 - outside smoother).

    Used as the domain weight of the small-density barrier.
    """
    vals, grads = mollified_batch(kind, eps, y)
    return 1.0 - vals, -grads


def residual(spec: ConstraintSpec, m: EmpiricalMeasure, eps: float = 0.0) -> float:
    """Empirical (mollified) expectation minus the target; eps=0 means exact."""
    if m.n == 0:
        raise EmptyMeasure("residual of an empty measure")
    if spec.dim != m.dim:
        raise DimensionMismatch(f"constraint dim {spec.dim} != measure dim {m.dim}")
    if eps > 0:
        vals, _ = mollified_batch(spec, eps, m.points)
    else:
        vals = evaluate_batch(spec, m.points)
    return float(np.dot(m.weights, vals)) - spec.fbar


def target_from_surrogate(kind: ConstraintKind, surrogate: PriorSpec) -> float:
    """Expectation of the constraint function under a surrogate measure."""
    if kind.dim == 1:
        if getattr(surrogate, "dim", None) != 1:
            raise Unsupported("1D constraint needs a 1D surrogate")
        if isinstance(kind, Relu) and isinstance(surrogate, Lognormal):
            tail = 1.0 - surrogate.cdf(kind.omega) if kind.omega > 0 else 1.0
            return partial_expectation(surrogate, kind.omega) - kind.omega * tail
        if isinstance(kind, Heaviside):
            return 1.0 - float(surrogate.cdf(kind.x0))
        if isinstance(kind, IndicatorOutsideInterval):
            return 1.0 - surrogate.mass_between(kind.a, np.nextafter(kind.b, math.inf))
        # ramp against a generic 1D prior: quadrature on the natural scale
        lo, hi = surrogate.support if hasattr(surrogate, "support") else (-math.inf, math.inf)
        return surrogate.expectation(lambda x: np.maximum(x - kind.omega, 0.0), max(lo, kind.omega), hi)
    if getattr(surrogate, "dim", None) != 2:
        raise Unsupported("2D constraint needs a 2D surrogate")
    if isinstance(kind, IndicatorOutsideHalfplane):
        if isinstance(surrogate, Gaussian2D):
            m = np.asarray(surrogate.mean)
            s = math.sqrt(np.asarray(surrogate.cov)[0, 0])
            from scipy.special import ndtr

            return float(ndtr((kind.threshold - m[0]) / s))
        if isinstance(surrogate, UniformDisk):
            return _disk_slice_fraction(surrogate.radius, kind.threshold)
    if isinstance(kind, IndicatorOutsideDisk):
        if isinstance(surrogate, Gaussian2D):
            return 1.0 - gaussian2d_disk_mass(surrogate, kind.radius)
        if isinstance(surrogate, UniformDisk):
            if kind.radius >= surrogate.radius:
                return 0.0
            return 1.0 - (kind.radius / surrogate.radius) ** 2
    raise Unsupported(f"no surrogate target rule for {type(kind).__name__}")


def gaussian2d_disk_mass(prior: Gaussian2D, radius: float, order: int = 96, panels: int = 12) -> float:
    """Prior mass of the closed origin-centered disk, by polar tensor quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def panel_nodes(lo, hi, n_panels):
        edges = np.linspace(lo, hi, n_panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        ws = (half[:, None] * weights[None, :]).ravel()
        return xs, ws

    r, wr = panel_nodes(0.0, radius, panels)
    th, wth = panel_nodes(0.0, 2 * math.pi, panels)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    dens = np.asarray(prior.pdf(pts)).reshape(rr.shape)
    return float(np.einsum("i,j,ij->", wr * r, wth, dens))


def _disk_slice_fraction(radius: float, threshold: float) -> float:
    """Fraction of a uniform disk with z1 < threshold."""
    t = np.clip(threshold / radius, -1.0, 1.0)
    # area of the circular segment left of the chord, normalized
    return float((math.acos(-t) - (-t) * math.sqrt(1 - t * t)) / math.pi) if abs(t) < 1 else (0.0 if t <= -1 else 1.0)
