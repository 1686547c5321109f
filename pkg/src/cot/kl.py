"""Relative-entropy calibration baseline.

Closed-form solutions of the entropy-minimizing calibration: restriction
and renormalization for interval-support constraints, and piecewise
exponential tilts for ramp-payoff constraints.  With a lognormal prior the
tilted integral diverges for any positive cumulative tilt, so every tilt
lives on an explicitly capped domain (default: the prior's 1 - 1e-9
quantile); the cap is part of the solution object and is reported by the
CLI run manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import BracketFailure, DivergentTilt, NoSignChange, Unsupported, ZeroMass
from .measures import EmpiricalMeasure, Lognormal, Normal1D, Prior1D
from .numerics import Bracket, expand_bracket, find_root_scalar, newton_system

__all__ = [
    "KlSolution",
    "kl_indicator",
    "kl_relu_single",
    "kl_relu_multi",
    "kl_density",
    "kl_sample",
    "default_domain_cap",
]

_EXP_GUARD = 690.0  # beyond this the tilt overflows double precision


def default_domain_cap(prior: Prior1D) -> float:
    """Upper integration limit: the prior's 1 - 1e-9 quantile."""
    return float(prior.quantile(1.0 - 1e-9))


@dataclass(frozen=True)
class KlSolution:
    """Either a renormalized restriction or a piecewise exponential tilt."""

    prior: Prior1D
    kind: str  # "indicator" or "relu"
    a: float = math.nan
    b: float = math.nan
    omegas: tuple[float, ...] = ()
    lambdas: tuple[float, ...] = ()
    z: float = 1.0
    y_max: float = math.inf
    _cdf_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def domain(self) -> tuple[float, float]:
        if self.kind == "indicator":
            return (self.a, self.b)
        lo = self.prior.support[0]
        return (lo, self.y_max)

    def to_jsonable(self) -> dict:
        if self.kind == "indicator":
            return {"kind": "indicator", "a": self.a, "b": self.b, "z": self.z}
        return {
            "kind": "relu",
            "omegas": list(self.omegas),
            "lambdas": list(self.lambdas),
            "z": self.z,
            "y_max": self.y_max,
        }


def kl_indicator(prior: Prior1D, a: float, b: float) -> KlSolution:
    """Prior restricted to [a, b], renormalized."""
    if a >= b:
        raise ValueError("requires a < b")
    mass = prior.mass_between(a, b)
    if mass <= 1e-300:
        raise ZeroMass(f"prior mass of [{a}, {b}] is {mass:g}")
    return KlSolution(prior=prior, kind="indicator", a=a, b=b, z=mass)


def _tilt_exponent(omegas: Sequence[float], lambdas: Sequence[float], y) -> np.ndarray:
    """Cumulative tilt sum_i lam_i (y - omega_i)+ ... evaluated piecewise.

    The exponent is sum over i of lam_i (y - omega_i) for omegas below y,
    which is continuous and piecewise linear in y.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    for om, lam in zip(omegas, lambdas):
        out = out + lam * np.where(y >= om, y - om, 0.0)
    return out


class _TiltQuadrature:
    """Shared quadrature grid for all tilted-moment integrals of one solve."""

    def __init__(self, prior: Prior1D, omegas: Sequence[float], y_max: float,
                 order: int = 64, panels_per_piece: int = 24):
        lo = prior.support[0]
        if isinstance(prior, Lognormal):
            lo = max(lo, float(prior.quantile(1e-13)))
        elif isinstance(prior, Normal1D):
            lo = max(lo, prior.mu - 13.0 * prior.sigma)
        cuts = sorted({lo, y_max, *[om for om in omegas if lo < om < y_max]})
        nodes, weights = np.polynomial.legendre.leggauss(order)
        xs, ws = [], []
        for left, right in zip(cuts[:-1], cuts[1:]):
            if isinstance(prior, Lognormal):
                # integrate on the log scale where the prior is Gaussian
                u_edges = np.linspace(math.log(left), math.log(right), panels_per_piece + 1)
                for ul, ur in zip(u_edges[:-1], u_edges[1:]):
                    mid, half = 0.5 * (ul + ur), 0.5 * (ur - ul)
                    u = mid + half * nodes
                    y = np.exp(u)
                    xs.append(y)
                    ws.append(half * weights * y)  # dy = y du
            else:
                edges = np.linspace(left, right, panels_per_piece + 1)
                for el, er in zip(edges[:-1], edges[1:]):
                    mid, half = 0.5 * (el + er), 0.5 * (er - el)
                    xs.append(mid + half * nodes)
                    ws.append(half * weights)
        self.y = np.concatenate(xs)
        self.w = np.concatenate(ws) * np.asarray(prior.pdf(np.concatenate(xs)))
        self.below = prior.mass_between(-math.inf, lo)

    def moments(self, omegas, lambdas):
        """(Z, tilted payoff expectations) for the current multipliers."""
        expo = _tilt_exponent(omegas, lambdas, self.y)
        m = float(np.max(expo)) if expo.size else 0.0
        if m > _EXP_GUARD:
            raise DivergentTilt(f"tilt exponent reaches {m:.3g} on the capped domain")
        tilt = np.exp(expo)
        z = float(np.sum(self.w * tilt)) + self.below
        payoffs = np.stack([np.where(self.y >= om, self.y - om, 0.0) for om in omegas])
        first = (self.w * tilt)[None, :] * payoffs
        exp_payoff = first.sum(axis=1) / z
        # covariance of payoffs under the tilted measure = Jacobian of the
        # constraint residuals in the multipliers
        second = (first[:, None, :] * payoffs[None, :, :]).sum(axis=2) / z
        cov = second - np.outer(exp_payoff, exp_payoff)
        return z, exp_payoff, cov


def kl_relu_single(prior: Prior1D, omega: float, fbar: float, y_max: float | None = None) -> KlSolution:
    """Single-ramp exponential tilt: density proportional to p(y) e^{g (y-omega)+}.

    The multiplier g is the unique root of the tilted-expectation residual
    on the capped domain.
    """
    if fbar <= 0:
        raise ValueError("target must be positive")
    if y_max is None:
        y_max = default_domain_cap(prior)
    if y_max <= omega:
        raise ValueError("domain cap must exceed the strike")
    quad = _TiltQuadrature(prior, [omega], y_max)

    def residual(g: float) -> float:
        try:
            _, exp_payoff, _ = quad.moments([omega], [g])
        except DivergentTilt:
            # the tilted expectation saturates toward y_max - omega
            return (y_max - omega) - fbar + 1e6
        return float(exp_payoff[0]) - fbar

    step = 1.0 / max(y_max - omega, 1.0)
    try:
        bracket = expand_bracket(residual, 0.0, step, 2.0, 1e9)
    except (NoSignChange,) as exc:
        raise BracketFailure(
            f"no tilt multiplier reaches target {fbar} on domain capped at {y_max}"
        ) from exc
    gamma = find_root_scalar(residual, bracket, 1e-14)
    z, _, _ = quad.moments([omega], [gamma])
    return KlSolution(
        prior=prior, kind="relu", omegas=(omega,), lambdas=(gamma,), z=z, y_max=y_max
    )


def kl_relu_multi(
    prior: Prior1D,
    omegas: Sequence[float],
    fbars: Sequence[float],
    y_max: float | None = None,
) -> KlSolution:
    """K-ramp exponential tilt; multipliers solved by damped Newton.

    The Jacobian of the residuals is the payoff covariance under the current
    tilted measure, evaluated by quadrature on a shared grid.
    """
    omegas = [float(w) for w in omegas]
    fbars = [float(f) for f in fbars]
    if any(b <= a for a, b in zip(omegas[:-1], omegas[1:])):
        raise ValueError("omegas must be strictly ascending")
    if any(f <= 0 for f in fbars):
        raise ValueError("targets must be positive")
    if y_max is None:
        y_max = default_domain_cap(prior)
    if len(omegas) == 1:
        return kl_relu_single(prior, omegas[0], fbars[0], y_max)
    quad = _TiltQuadrature(prior, omegas, y_max)
    targets = np.asarray(fbars)

    def F(lams: np.ndarray) -> np.ndarray:
        _, exp_payoff, _ = quad.moments(omegas, lams)
        return exp_payoff - targets

    def J(lams: np.ndarray) -> np.ndarray:
        _, _, cov = quad.moments(omegas, lams)
        return cov

    lams = newton_system(F, J, np.zeros(len(omegas)), tol=1e-11, max_iter=200)
    z, _, _ = quad.moments(omegas, lams)
    return KlSolution(
        prior=prior, kind="relu", omegas=tuple(omegas), lambdas=tuple(float(v) for v in lams),
        z=z, y_max=y_max,
    )


def kl_density(sol: KlSolution, y) -> np.ndarray | float:
    """Density of the solution at query point(s); zero outside the domain."""
    arr = np.atleast_1d(np.asarray(y, dtype=float))
    if sol.kind == "indicator":
        inside = (arr >= sol.a) & (arr <= sol.b)
        out = np.where(inside, np.asarray(sol.prior.pdf(arr)) / sol.z, 0.0)
    else:
        inside = arr <= sol.y_max
        expo = np.clip(_tilt_exponent(sol.omegas, sol.lambdas, arr), -math.inf, _EXP_GUARD)
        out = np.where(inside, np.asarray(sol.prior.pdf(arr)) * np.exp(expo) / sol.z, 0.0)
    return float(out[0]) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def _inverse_cdf(sol: KlSolution, knots: int = 2048) -> PchipInterpolator:
    key = ("inv_cdf", knots)
    if key in sol._cdf_cache:
        return sol._cdf_cache[key]
    lo, hi = sol.domain()
    prior = sol.prior
    if isinstance(prior, Lognormal):
        lo_eff = max(lo, float(prior.quantile(1e-12)))
        ys = np.exp(np.linspace(math.log(lo_eff), math.log(hi), knots))
    elif isinstance(prior, Normal1D):
        lo_eff = max(lo, prior.mu - 12 * prior.sigma)
        hi_eff = min(hi, prior.mu + 12 * prior.sigma) if sol.kind == "relu" else hi
        ys = np.linspace(lo_eff, hi_eff, knots)
    else:
        ys = np.linspace(lo, hi, knots)
    dens = np.asarray(kl_density(sol, ys))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(ys))])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 1e-15])
    interp = PchipInterpolator(cdf[keep], ys[keep], extrapolate=False)
    sol._cdf_cache[key] = interp
    return interp


def kl_sample(sol: KlSolution, n: int, seed: int) -> EmpiricalMeasure:
    """Inverse-CDF sampling on a cached monotone interpolant (2048 knots)."""
    inv = _inverse_cdf(sol)
    rng = np.random.default_rng(seed)
    u = rng.uniform(np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0), n)
    pts = np.asarray(inv(u), dtype=float)
    lo, hi = sol.domain()
    pts = np.clip(pts, lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None)
    return EmpiricalMeasure(points=pts.reshape(-1, 1), seed=seed, origin="kl_solution")


def kl_expectation(sol: KlSolution, g, kinks: Sequence[float] = ()) -> float:
    """Quadrature of g against the solution density (domain-aware)."""
    lo, hi = sol.domain()
    prior = sol.prior
    if sol.kind == "indicator":
        cuts = sorted({lo, hi, *[k for k in kinks if lo < k < hi]})
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += prior.expectation(g, a, b)
        return total / sol.z
    quad = _TiltQuadrature(prior, list(sol.omegas) + [k for k in kinks if k < sol.y_max], sol.y_max)
    expo = np.clip(_tilt_exponent(sol.omegas, sol.lambdas, quad.y), -math.inf, _EXP_GUARD)
    vals = np.asarray(g(quad.y))
    below = 0.0  # mass below the grid floor carries negligible weight
    return float(np.sum(quad.w * np.exp(expo) * vals)) / sol.z + below