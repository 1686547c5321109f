"""Closed-form constrained-transport solutions.

1D: restriction to an interval, single ramp-payoff constraint, and the
backward recursion over multiple ascending ramp constraints.  Each solution
is a piecewise shift/projection map (monotone nondecreasing) together with
the transported measure (continuous pieces plus boundary atoms).

2D: projection onto a disk or a half-plane for indicator constraints.

Also here: a grid-search oracle over monotone couplings of a discrete prior,
used by the test suite to validate the closed forms on atomic inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .constraints import ConstraintSpec, evaluate_batch, gaussian2d_disk_mass
from .errors import (
    CoverageGap,
    DimensionMismatch,
    GridInfeasible,
    InconsistentOrder,
    InfeasibleTargets,
    NegativeTarget,
    NoFeasibleCandidate,
    NoSignChange,
    Unsupported,
)
from .measures import DiscreteAtoms, EmpiricalMeasure, Gaussian2D, Prior1D
from .numerics import Bracket, expand_bracket, find_root_scalar

__all__ = [
    "Identity",
    "ConstantShift",
    "ProjectTo",
    "MapPiece",
    "ShiftMap",
    "RadialClipMap",
    "AxisClipMap",
    "ContinuousPiece",
    "MixedMeasure",
    "ProjectedMeasure2D",
    "ReluRecursionState",
    "measure_from_map",
    "solve_indicator_interval",
    "solve_relu_single",
    "solve_relu_multi",
    "transport_cost",
    "pushforward",
    "solve_indicator_disk",
    "solve_indicator_halfplane",
    "brute_force_oracle",
]

_ROOT_TOL = 1e-13


# ---------------------------------------------------------------------------
# transport maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class ConstantShift:
    offset: float


@dataclass(frozen=True)
class ProjectTo:
    point: float


Action = Union[Identity, ConstantShift, ProjectTo]


@dataclass(frozen=True)
class MapPiece:
    """Half-open source interval [lo, hi) with one action applied on it."""

    lo: float
    hi: float
    action: Action


@dataclass(frozen=True)
class ShiftMap:
    """Piecewise map T(x) = x + tau(x); pieces partition the real line."""

    pieces: tuple[MapPiece, ...]

    def __post_init__(self):
        ps = _normalize_pieces(self.pieces)
        object.__setattr__(self, "pieces", ps)
        object.__setattr__(self, "_los", np.asarray([p.lo for p in ps]))

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).astype(float)
        idx = np.searchsorted(self._los, flat, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        out = flat.copy()
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if not np.any(mask):
                continue
            if isinstance(piece.action, ConstantShift):
                out[mask] = flat[mask] + piece.action.offset
            elif isinstance(piece.action, ProjectTo):
                out[mask] = piece.action.point
        return float(out[0]) if x.ndim == 0 else out

    def __call__(self, x):
        return self.apply(x)

    def is_identity(self) -> bool:
        return all(isinstance(p.action, Identity) for p in self.pieces)

    def to_jsonable(self) -> list[dict]:
        rows = []
        for p in self.pieces:
            if isinstance(p.action, Identity):
                action, params = "identity", {}
            elif isinstance(p.action, ConstantShift):
                action, params = "shift", {"offset": p.action.offset}
            else:
                action, params = "project", {"point": p.action.point}
            rows.append({"interval": [p.lo, p.hi], "action": action, "params": params})
        return rows


def _same_action(a: Action, b: Action) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, ConstantShift):
        return a.offset == b.offset
    if isinstance(a, ProjectTo):
        return a.point == b.point
    return True


def _normalize_pieces(pieces: Sequence[MapPiece]) -> tuple[MapPiece, ...]:
    ps = [p for p in pieces if p.hi > p.lo]
    ps.sort(key=lambda p: p.lo)
    if not ps:
        return (MapPiece(-math.inf, math.inf, Identity()),)
    filled: list[MapPiece] = []
    cursor = -math.inf
    for p in ps:
        if p.lo > cursor:
            filled.append(MapPiece(cursor, p.lo, Identity()))
        elif p.lo < cursor:
            raise ValueError("map pieces overlap")
        # zero-offset shifts are identities
        action = Identity() if isinstance(p.action, ConstantShift) and p.action.offset == 0.0 else p.action
        filled.append(MapPiece(p.lo, p.hi, action))
        cursor = p.hi
    if cursor < math.inf:
        filled.append(MapPiece(cursor, math.inf, Identity()))
    merged: list[MapPiece] = [filled[0]]
    for p in filled[1:]:
        last = merged[-1]
        if _same_action(last.action, p.action) and last.hi == p.lo:
            merged[-1] = MapPiece(last.lo, p.hi, last.action)
        else:
            merged.append(p)
    return tuple(merged)


@dataclass(frozen=True)
class RadialClipMap:
    """Identity inside the closed disk of given radius; radial projection outside."""

    radius: float

    def apply(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.sqrt(np.sum(pts**2, axis=1))
        scale = np.where(r > self.radius, self.radius / np.maximum(r, 1e-300), 1.0)
        return pts * scale[:, None]

    def __call__(self, x):
        return self.apply(x)


@dataclass(frozen=True)
class AxisClipMap:
    """Identity where z1 >= threshold; else (z1, z2) -> (threshold, z2)."""

    threshold: float

    def apply(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float)).copy()
        pts[:, 0] = np.maximum(pts[:, 0], self.threshold)
        return pts

    def __call__(self, x):
        return self.apply(x)


# ---------------------------------------------------------------------------
# measures produced by the solvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousPiece:
    """Prior restricted to [src_lo, src_hi), translated by ``shift``."""

    prior: Prior1D
    src_lo: float
    src_hi: float
    shift: float

    @property
    def mass(self) -> float:
        return self.prior.mass_between(self.src_lo, self.src_hi)


@dataclass(frozen=True)
class MixedMeasure:
    """Continuous density pieces plus finitely many atoms (1D).

    Overlapping piece images are additive: the density at y sums every piece
    whose translated support covers y.
    """

    continuous: tuple[ContinuousPiece, ...]
    atoms: tuple[tuple[float, float], ...]

    def total_mass(self) -> float:
        return sum(p.mass for p in self.continuous) + sum(m for _, m in self.atoms)

    def density(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        for p in self.continuous:
            lo, hi = p.src_lo + p.shift, p.src_hi + p.shift
            mask = (y >= lo) & (y < hi)
            if np.any(mask):
                out[mask] += np.asarray(p.prior.pdf(y[mask] - p.shift))
        return out

    def expectation(self, g, kinks: Sequence[float] = ()) -> float:
        """Integral of g against the measure; pieces split at payoff kinks."""
        total = 0.0
        for p in self.continuous:
            cuts = [p.src_lo, p.src_hi]
            for k in kinks:
                src = k - p.shift
                if p.src_lo < src < p.src_hi:
                    cuts.append(src)
            cuts = sorted(set(cuts))
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                shift = p.shift
                total += p.prior.expectation(lambda x: np.asarray(g(np.asarray(x) + shift)), lo, hi)
        for loc, mass in self.atoms:
            total += mass * float(np.asarray(g(np.asarray([loc])))[0] if callable(g) else g)
        return total

    def to_jsonable(self) -> dict:
        return {
            "continuous": [
                {
                    "prior": type(p.prior).__name__,
                    "interval": [p.src_lo, p.src_hi],
                    "shift": p.shift,
                }
                for p in self.continuous
            ],
            "atoms": [{"loc": loc, "mass": mass} for loc, mass in self.atoms],
        }


@dataclass(frozen=True)
class ProjectedMeasure2D:
    """Prior restricted to a feasible region plus a boundary layer of mass alpha.

    The boundary measure is kept lazily as (projection rule + prior); its
    one-dimensional marginal density along the boundary is evaluated on
    demand.
    """

    prior: Gaussian2D
    region: str  # "disk" or "halfplane"
    param: float  # radius or threshold
    alpha: float

    def total_mass(self) -> float:
        return 1.0

    def boundary_density(self, s) -> np.ndarray:
        """Projected-mass density along the boundary.

        Disk: mass per unit angle at angle s (integrates to alpha over
        [0, 2pi)).  Half-plane: mass per unit z2 at height s (integrates to
        alpha over the line).
        """
        from .numerics import integrate

        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        if self.region == "disk":
            for i, theta in enumerate(s):
                ct, st = math.cos(theta), math.sin(theta)
                out[i] = integrate(
                    lambda r: np.asarray(self.prior.pdf(np.column_stack([r * ct, r * st]))) * r,
                    self.param,
                    math.inf,
                )
        elif self.region == "halfplane":
            for i, z2 in enumerate(s):
                out[i] = integrate(
                    lambda z1: np.asarray(
                        self.prior.pdf(np.column_stack([z1, np.full_like(z1, z2)]))
                    ),
                    -math.inf,
                    self.param,
                )
        else:
            raise Unsupported(f"unknown region {self.region}")
        return out

    def to_jsonable(self) -> dict:
        return {"region": self.region, "param": self.param, "alpha": self.alpha}


def measure_from_map(m: ShiftMap, prior: Prior1D) -> MixedMeasure:
    """Push the prior through a piecewise map, collecting atoms from projections."""
    pieces: list[ContinuousPiece] = []
    atom_mass: dict[float, float] = {}
    for p in m.pieces:
        if isinstance(p.action, ProjectTo):
            mass = prior.mass_between(p.lo, p.hi)
            if mass > 1e-15:
                atom_mass[p.action.point] = atom_mass.get(p.action.point, 0.0) + mass
        else:
            shift = p.action.offset if isinstance(p.action, ConstantShift) else 0.0
            if prior.mass_between(p.lo, p.hi) > 1e-15:
                pieces.append(ContinuousPiece(prior=prior, src_lo=p.lo, src_hi=p.hi, shift=shift))
    atoms = tuple(sorted(atom_mass.items()))
    return MixedMeasure(continuous=tuple(pieces), atoms=atoms)


# ---------------------------------------------------------------------------
# 1D solvers
# ---------------------------------------------------------------------------


def _check_1d_prior(prior) -> None:
    if getattr(prior, "dim", None) != 1:
        raise DimensionMismatch("this solver requires a 1D prior")


def _payoff_above(prior: Prior1D, c: float) -> float:
    """Integral of (x - c)+ against the prior."""
    return prior.mean_between(c, math.inf) - c * prior.mass_between(c, math.inf)


def _projection_cost(prior: Prior1D, w: float, lo: float, hi: float) -> float:
    """Integral of (w - x)^2 against the prior over [lo, hi)."""
    mass = prior.mass_between(lo, hi)
    if mass <= 0:
        return 0.0
    return w * w * mass - 2 * w * prior.mean_between(lo, hi) + prior.sqmean_between(lo, hi)


def _scale_of(prior: Prior1D, *values: float) -> float:
    finite = [abs(v) for v in values if math.isfinite(v)]
    lo, hi = prior.support
    if math.isfinite(lo):
        finite.append(abs(lo))
    if math.isfinite(hi):
        finite.append(abs(hi))
    return max([1.0] + finite)


def _solve_monotone(h, target: float, step: float, max_width: float) -> float | None:
    """Root of the increasing function h(lam) = target; None if out of reach."""

    def f(lam):
        return h(lam) - target

    if f(0.0) == 0.0:
        return 0.0
    try:
        bracket = expand_bracket(f, 0.0, step, 2.0, max_width)
    except NoSignChange:
        return None
    try:
        return find_root_scalar(f, bracket, _ROOT_TOL)
    except NoSignChange:
        return None


def solve_indicator_interval(prior: Prior1D, a: float, b: float):
    """Closest measure supported in [a, b]: keep the inside, project the rest.

    Returns (MixedMeasure, ShiftMap).  The boundary atoms carry exactly the
    prior mass of each outside tail.
    """
    _check_1d_prior(prior)
    if a > b:
        raise ValueError("requires a <= b")
    if a == b:
        m = ShiftMap(pieces=(MapPiece(-math.inf, math.inf, ProjectTo(a)),))
        return measure_from_map(m, prior), m
    b_edge = np.nextafter(b, math.inf)  # mass sitting exactly at b stays in place
    m = ShiftMap(
        pieces=(
            MapPiece(-math.inf, a, ProjectTo(a)),
            MapPiece(a, b_edge, Identity()),
            MapPiece(b_edge, math.inf, ProjectTo(b)),
        )
    )
    return measure_from_map(m, prior), m


@dataclass(frozen=True)
class _Candidate:
    system: str
    lam: float
    x_star: float
    pieces: tuple[MapPiece, ...]
    cost: float


def _single_relu_candidates(prior: Prior1D, omega: float, fbar: float) -> list[_Candidate]:
    """Candidate solutions for one ramp constraint governing [x_*, inf).

    "shift-at-threshold" places the jump at omega - lam; "shift-with-gap"
    at omega - lam/2 (reachable only when the target exceeds the prior's own
    payoff).  A negative lam caps x_* at omega and projects [omega,
    omega - lam) onto omega, which keeps the map monotone.
    """
    scale = _scale_of(prior, omega, fbar)
    max_width = 2.0**20 * (abs(omega) + 1.0) + 2.0**10 * scale
    q0 = _payoff_above(prior, omega)
    candidates: list[_Candidate] = []

    if fbar <= 1e-15 * scale:
        pieces = (MapPiece(omega, math.inf, ProjectTo(omega)),)
        cost = _projection_cost(prior, omega, omega, math.inf)
        candidates.append(_Candidate("project-tail", 0.0, omega, pieces, cost))
        return candidates

    def h1(lam: float) -> float:
        return _payoff_above(prior, omega - lam)

    lam1 = _solve_monotone(h1, fbar, 0.25 * scale, max_width)
    if lam1 is not None:
        if lam1 >= 0:
            x_star = omega - lam1
            pieces = (MapPiece(x_star, math.inf, ConstantShift(lam1)),)
            cost = lam1**2 * prior.mass_between(x_star, math.inf)
        else:
            x_star = omega
            pieces = (
                MapPiece(omega, omega - lam1, ProjectTo(omega)),
                MapPiece(omega - lam1, math.inf, ConstantShift(lam1)),
            )
            cost = _projection_cost(prior, omega, omega, omega - lam1) + lam1**2 * prior.mass_between(
                omega - lam1, math.inf
            )
        candidates.append(_Candidate("shift-at-threshold", lam1, x_star, pieces, cost))

    if fbar > q0:

        def h2(lam: float) -> float:
            c = omega - 0.5 * lam
            return _payoff_above(prior, c) + 0.5 * lam * prior.mass_between(c, math.inf)

        lam2 = _solve_monotone(h2, fbar, 0.25 * scale, max_width)
        if lam2 is not None and lam2 > 0:
            x_star = omega - 0.5 * lam2
            pieces = (MapPiece(x_star, math.inf, ConstantShift(lam2)),)
            cost = lam2**2 * prior.mass_between(x_star, math.inf)
            candidates.append(_Candidate("shift-with-gap", lam2, x_star, pieces, cost))

    return candidates


def solve_relu_single(prior: Prior1D, omega: float, fbar: float):
    """Wasserstein-closest measure with a single ramp-payoff equality.

    Returns (lam, x_star, map, cost).
    """
    _check_1d_prior(prior)
    if fbar < 0:
        raise NegativeTarget(f"target {fbar} < 0")
    scale = _scale_of(prior, omega, fbar)
    q0 = _payoff_above(prior, omega)
    if abs(fbar - q0) <= 1e-14 * scale:
        m = ShiftMap(pieces=(MapPiece(-math.inf, math.inf, Identity()),))
        return 0.0, omega, m, 0.0
    if isinstance(prior, DiscreteAtoms) and prior.points.size <= 800:
        # atomic priors: the continuum first-order systems are incomplete
        # (thresholds may fall between atoms); enumerate blocks exactly
        targets, cost, _ = _discrete_exact_relu(prior, [omega], [fbar])
        mp = _map_from_targets(prior.points, targets)
        moved = np.abs(targets - prior.points) > 1e-12
        if not np.any(moved):
            return 0.0, omega, mp, cost
        lam = float(targets[-1] - prior.points[-1])
        x_star = float(prior.points[int(np.argmax(moved))])
        return lam, x_star, mp, cost
    candidates = _single_relu_candidates(prior, omega, fbar)
    if not candidates:
        raise NoFeasibleCandidate(
            f"no candidate system solvable for omega={omega}, fbar={fbar}"
        )
    best = min(candidates, key=lambda c: (c.cost, abs(c.lam)))
    m = ShiftMap(pieces=best.pieces)
    return best.lam, best.x_star, m, best.cost


@dataclass(frozen=True)
class ReluRecursionState:
    """Bookkeeping for one segment of the backward multi-ramp recursion."""

    k: int
    x_star: float
    lam: float
    x_next: float
    delta_omega: float
    delta_f_tilde: float
    system: str
    cost: float
    pieces: tuple[MapPiece, ...]


def _interior_candidates(
    prior: Prior1D, omega_k: float, omega_next: float, x_next: float, dft: float
) -> list[_Candidate]:
    """Feasible candidate systems for an interior segment [x_k*, x_next).

    ``dft`` is the segment's share of the payoff difference; the segment's
    shift is bounded by the strike spacing, which makes every candidate
    equation monotone in lam.
    """
    scale = _scale_of(prior, omega_k, omega_next, x_next)
    tol = 1e-10 * scale
    d_omega = omega_next - omega_k
    max_width = 2.0**20 * (d_omega + 1.0) + 2.0**10 * scale
    out: list[_Candidate] = []

    if dft < -tol:
        return out
    if abs(dft) <= tol:
        # the crossing points coincide; the segment is empty
        out.append(_Candidate("collapse", 0.0, x_next, (), 0.0))
        return out

    def shift_integral(lo: float, hi: float, lam: float) -> float:
        """Integral of (z - omega_k + lam) dP over [lo, hi)."""
        if hi <= lo:
            return 0.0
        return prior.mean_between(lo, hi) - (omega_k - lam) * prior.mass_between(lo, hi)

    # gap systems: x_* = omega_k - lam/2 (lam > 0)
    def h_plus_gap(lam: float) -> float:
        return shift_integral(omega_k - 0.5 * lam, x_next, lam)

    lam = _solve_monotone(h_plus_gap, dft, 0.25 * scale, max_width)
    if lam is not None and lam > tol:
        x_star = omega_k - 0.5 * lam
        if x_star <= x_next + tol and x_next <= omega_next - lam + tol:
            pieces = (MapPiece(x_star, x_next, ConstantShift(lam)),)
            cost = lam**2 * prior.mass_between(x_star, x_next)
            out.append(_Candidate("gap-shift", lam, x_star, pieces, cost))

    def h_minus_gap(lam: float) -> float:
        top = omega_next - lam
        return shift_integral(omega_k - 0.5 * lam, top, lam) + d_omega * prior.mass_between(
            top, x_next
        )

    lam = _solve_monotone(h_minus_gap, dft, 0.25 * scale, max_width)
    if lam is not None and tol < lam < 2 * d_omega + tol:
        x_star = omega_k - 0.5 * lam
        top = omega_next - lam
        if x_star <= top + tol and top <= x_next + tol:
            pieces = (
                MapPiece(x_star, top, ConstantShift(lam)),
                MapPiece(top, x_next, ProjectTo(omega_next)),
            )
            cost = lam**2 * prior.mass_between(x_star, top) + _projection_cost(
                prior, omega_next, top, x_next
            )
            out.append(_Candidate("gap-shift-project", lam, x_star, pieces, cost))

    # contact systems: x_* = omega_k - lam (either sign of lam)
    def h_plus_contact(lam: float) -> float:
        return shift_integral(omega_k - lam, x_next, lam)

    lam = _solve_monotone(h_plus_contact, dft, 0.25 * scale, max_width)
    if lam is not None:
        x_star = omega_k - lam
        if x_star <= x_next + tol and x_next <= omega_next - lam + tol:
            pieces = (MapPiece(x_star, x_next, ConstantShift(lam)),)
            cost = lam**2 * prior.mass_between(x_star, x_next)
            out.append(_Candidate("contact-shift", lam, x_star, pieces, cost))

    def h_minus_contact(lam: float) -> float:
        top = omega_next - lam
        return shift_integral(omega_k - lam, top, lam) + d_omega * prior.mass_between(top, x_next)

    lam = _solve_monotone(h_minus_contact, dft, 0.25 * scale, max_width)
    if lam is not None and lam < d_omega + tol:
        x_star = omega_k - lam
        top = omega_next - lam
        if top <= x_next + tol:
            pieces = (
                MapPiece(x_star, top, ConstantShift(lam)),
                MapPiece(top, x_next, ProjectTo(omega_next)),
            )
            cost = lam**2 * prior.mass_between(x_star, top) + _projection_cost(
                prior, omega_next, top, x_next
            )
            out.append(_Candidate("contact-shift-project", lam, x_star, pieces, cost))

    # all-project system: the whole segment collapses onto omega_next
    target_mass = dft / d_omega
    if target_mass <= prior.mass_between(-math.inf, x_next) + tol:
        x_star = _mass_cut(prior, x_next, target_mass)
        if x_star is not None and x_star <= x_next + tol:
            pieces = (MapPiece(x_star, x_next, ProjectTo(omega_next)),)
            cost = _projection_cost(prior, omega_next, x_star, x_next)
            out.append(_Candidate("project-all", omega_next - x_star, x_star, pieces, cost))

    return out


def _band_waterfill(seg_x, seg_w, omega: float, hi: float, rhs: float):
    """Exact common-shift-with-clipping placement of a block of atoms.

    Targets t_i = clip(x_i + lam, omega, hi) with sum w_i (t_i - omega) = rhs;
    the block subproblem is convex (box constraints, no seam), so the
    clipped common shift is its exact optimum.  Returns (cost, targets) or
    None when rhs is out of reach.
    """
    c = seg_x.size
    d_omega = hi - omega
    if c == 0:
        return (0.0, seg_x.copy()) if abs(rhs) <= 1e-12 else None
    w_total = float(np.sum(seg_w))
    g_max = d_omega * w_total
    if rhs < -1e-12 or rhs > g_max * (1 + 1e-12) + 1e-12:
        return None
    rhs = min(max(rhs, 0.0), g_max)

    def targets_at(lam: float) -> np.ndarray:
        return omega + np.clip(seg_x + lam - omega, 0.0, d_omega)

    # kink sweep: G(lam) = sum w clip(x+lam-omega, 0, d_omega) is piecewise
    # linear and nondecreasing; between kinks the slope is the active weight
    enter = omega - seg_x
    events = [(float(e), +float(ww)) for e, ww in zip(enter, seg_w)]
    if math.isfinite(d_omega):
        events += [(float(e + d_omega), -float(ww)) for e, ww in zip(enter, seg_w)]
    events.sort()
    lam_prev = events[0][0]
    g_prev = 0.0
    slope = 0.0
    root = None
    for lam_evt, dw in events:
        g_here = g_prev + slope * (lam_evt - lam_prev)
        if g_here >= rhs - 1e-15 and root is None:
            if slope > 0:
                root = lam_prev + (rhs - g_prev) / slope
            else:
                root = lam_evt
            break
        lam_prev, g_prev = lam_evt, g_here
        slope += dw
    if root is None:
        if slope > 0:
            root = lam_prev + (rhs - g_prev) / slope
        elif g_prev >= rhs - 1e-9 * max(1.0, abs(rhs)):
            root = lam_prev
        else:
            return None
    t = targets_at(root)
    cost = float(np.sum(seg_w * (t - seg_x) ** 2))
    return cost, t


def _discrete_exact_relu(prior: DiscreteAtoms, omegas: Sequence[float], fbars: Sequence[float]):
    """Exact multi-ramp solution for an atomic prior.

    Monotone optima partition the sorted atoms into an identity prefix and
    one contiguous block per strike band; each block is a convex
    clip-waterfill.  Dynamic programming over block boundaries yields the
    exact optimum.  Returns (targets, cost) or raises InfeasibleTargets.
    """
    x = prior.points
    w = prior.weights
    n = x.size
    K = len(omegas)
    w_suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    ia1 = int(np.searchsorted(x, omegas[0] + 1e-12, side="right"))

    # best maps block-start index a -> (cost of bands k..K-1, their target arrays)
    top: dict[int, tuple[float, np.ndarray]] = {}
    top_range = range(ia1 + 1) if K == 1 else range(n + 1)
    for a in top_range:
        got = _band_waterfill(x[a:], w[a:], omegas[-1], math.inf, fbars[-1])
        if got is not None:
            top[a] = got
    if not top:
        raise InfeasibleTargets("top band target unreachable", segment=K)
    best: dict[int, tuple[float, list[np.ndarray]]] = {
        a: (cost, [t]) for a, (cost, t) in top.items()
    }
    for k in range(K - 2, -1, -1):
        d_omega = omegas[k + 1] - omegas[k]
        nxt: dict[int, tuple[float, list[np.ndarray]]] = {}
        for b, (cost_up, t_up) in best.items():
            rhs = fbars[k] - fbars[k + 1] - d_omega * float(w_suffix[b])
            for a in range(b + 1):
                got = _band_waterfill(x[a:b], w[a:b], omegas[k], omegas[k + 1], rhs)
                if got is None:
                    continue
                cost, t = got
                total = cost + cost_up
                if a not in nxt or total < nxt[a][0]:
                    nxt[a] = (total, [t] + t_up)
        if not nxt:
            raise InfeasibleTargets(
                f"band {k + 1} target unreachable for every block split", segment=k + 1
            )
        best = nxt

    # identity prefix must keep zero payoff on the first constraint
    feasible = [
        (cost, a, ts)
        for a, (cost, ts) in best.items()
        if a == 0 or x[a - 1] <= omegas[0] + 1e-12
    ]
    if not feasible:
        raise InfeasibleTargets("every split leaves payoff-bearing atoms unmoved", segment=1)
    cost, a0, ts = min(feasible, key=lambda t: t[0])
    targets = x.copy()
    if ts:
        targets[a0:] = np.concatenate(ts)
    starts = [a0]
    for t in ts[:-1]:
        starts.append(starts[-1] + t.size)
    return targets, cost, starts


def _map_from_targets(x: np.ndarray, targets: np.ndarray) -> ShiftMap:
    """Piecewise map agreeing with per-atom targets (projection/shift runs)."""
    n = x.size
    pieces: list[MapPiece] = []
    i = 0
    eps = 1e-12

    def edges(lo_idx, hi_idx):
        lo = -math.inf if lo_idx == 0 else 0.5 * (x[lo_idx - 1] + x[lo_idx])
        hi = math.inf if hi_idx >= n else 0.5 * (x[hi_idx - 1] + x[hi_idx])
        return lo, hi

    while i < n:
        j = i + 1
        if abs(targets[i] - x[i]) <= eps:
            while j < n and abs(targets[j] - x[j]) <= eps:
                j += 1
            lo, hi = edges(i, j)
            pieces.append(MapPiece(lo, hi, Identity()))
        elif j < n and abs(targets[j] - targets[i]) <= eps:
            # projection run: consecutive atoms sharing one target
            while j < n and abs(targets[j] - targets[i]) <= eps:
                j += 1
            lo, hi = edges(i, j)
            pieces.append(MapPiece(lo, hi, ProjectTo(float(targets[i]))))
        else:
            # constant-shift run: same displacement on consecutive atoms
            d = targets[i] - x[i]
            while j < n and abs((targets[j] - x[j]) - d) <= eps:
                j += 1
            lo, hi = edges(i, j)
            pieces.append(MapPiece(lo, hi, ConstantShift(float(d))))
        i = j
    return ShiftMap(pieces=tuple(pieces))


def _mass_cut(prior: Prior1D, hi: float, mass: float) -> float | None:
    """Point x with prior mass of [x, hi) equal to ``mass`` (None if unreachable)."""
    if mass <= 0:
        return hi
    if isinstance(prior, DiscreteAtoms):
        pts = prior.points
        w = np.where(pts < hi, prior.weights, 0.0)
        tail = np.cumsum(w[::-1])[::-1]
        hit = np.nonzero(np.abs(tail - mass) <= 1e-12)[0]
        if hit.size:
            return float(pts[hit[-1]])
        return None
    if mass > prior.mass_between(-math.inf, hi):
        return None

    def g(x):
        return prior.mass_between(x, hi) - mass

    lo_probe, width = hi - 1.0, 1.0
    while g(lo_probe) < 0:
        width *= 2
        lo_probe = hi - width
        if width > 1e12:
            return None
    try:
        return find_root_scalar(g, Bracket(lo_probe, hi), _ROOT_TOL)
    except NoSignChange:
        return None


def _band_solution_continuum(prior: Prior1D, omegas, fbars, bounds):
    """Evaluate the banded transport at fixed crossing points.

    bounds[k] = x_{k+1*}-style boundary where the map starts landing at or
    above omegas[k].  Within band k every point maps to
    clip(x + lam_k, omega_k, omega_{k+1}); lam_k is pinned by the band's
    share of the payoff targets.  Returns (cost, pieces) or None when some
    band's share is unreachable.
    """
    K = len(omegas)
    pieces: list[MapPiece] = []
    total = 0.0
    for k in range(K):
        b_lo = bounds[k]
        b_hi = bounds[k + 1] if k + 1 < K else math.inf
        om = omegas[k]
        om_hi = omegas[k + 1] if k + 1 < K else math.inf
        d_omega = om_hi - om
        if k + 1 < K:
            rhs = fbars[k] - fbars[k + 1] - d_omega * prior.mass_between(b_hi, math.inf)
        else:
            rhs = fbars[k]
        band_mass = prior.mass_between(b_lo, b_hi)
        g_cap = d_omega * band_mass
        tol = 1e-13 * max(1.0, abs(fbars[k]))
        if rhs < -tol or (math.isfinite(g_cap) and rhs > g_cap + 1e-10 * max(1.0, g_cap)):
            return None
        rhs = max(rhs, 0.0)
        if band_mass <= 0:
            if rhs > 1e-12 * max(1.0, abs(fbars[k])):
                return None
            continue

        def g_of(lam: float) -> float:
            c0 = om - lam
            lo1 = min(max(c0, b_lo), b_hi)
            if math.isfinite(om_hi):
                c1 = om_hi - lam
                hi1 = min(max(c1, b_lo), b_hi)
            else:
                hi1 = b_hi
            lin = prior.mean_between(lo1, hi1) - c0 * prior.mass_between(lo1, hi1)
            capped = d_omega * prior.mass_between(hi1, b_hi) if math.isfinite(om_hi) else 0.0
            return lin + capped

        scale = _scale_of(prior, om, om_hi if math.isfinite(om_hi) else om, b_lo)
        lam = _solve_monotone(g_of, rhs, 0.25 * scale, 2.0**24 * scale)
        if lam is None:
            return None
        c0 = om - lam
        lo1 = min(max(c0, b_lo), b_hi)
        if math.isfinite(om_hi):
            hi1 = min(max(om_hi - lam, b_lo), b_hi)
        else:
            hi1 = b_hi
        cost = _projection_cost(prior, om, b_lo, lo1)
        cost += lam**2 * prior.mass_between(lo1, hi1)
        if math.isfinite(om_hi):
            cost += _projection_cost(prior, om_hi, hi1, b_hi)
        total += cost
        if lo1 > b_lo:
            pieces.append(MapPiece(b_lo, lo1, ProjectTo(om)))
        if hi1 > lo1:
            pieces.append(MapPiece(lo1, hi1, ConstantShift(lam)))
        if math.isfinite(om_hi) and b_hi > hi1:
            pieces.append(MapPiece(hi1, b_hi, ProjectTo(om_hi)))
    return total, pieces


def _refine_boundaries(prior: Prior1D, omegas, fbars, seed_bounds):
    """Joint minimization over band crossing points around a seed.

    The per-segment recursion fixes each crossing from its own segment's
    stationarity and can miss cheaper joint configurations (a band may
    profitably absorb extra mass projected onto its lower strike to relieve
    the band below).  Nelder-Mead over a monotone reparameterization of the
    crossings, seeded at the recursion's solution.
    """
    from scipy.optimize import minimize

    K = len(omegas)
    span = max(omegas[-1] - omegas[0], 1.0)

    def decode(u):
        # b1 <= omega_1 always; nonnegative gaps stack the rest
        b = [omegas[0] - abs(u[0]) * span * 0.25]
        for j in range(1, K):
            b.append(b[-1] + abs(u[j]) * span * 0.5)
        return b

    def objective(u):
        got = _band_solution_continuum(prior, omegas, fbars, decode(u))
        if got is None:
            return 1e18
        return got[0]

    u0 = np.zeros(K)
    b1 = min(seed_bounds[0], omegas[0])
    u0[0] = (omegas[0] - b1) / (span * 0.25)
    prev = b1
    for j in range(1, K):
        u0[j] = max(seed_bounds[j] - prev, 0.0) / (span * 0.5)
        prev = max(seed_bounds[j], prev)
    best_u, best_val = u0, objective(u0)
    if not math.isfinite(best_val) or best_val >= 1e18:
        return None
    res = minimize(
        objective, u0, method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-11 * max(1.0, best_val), "maxiter": 800 * K},
    )
    if res.fun < best_val:
        best_u, best_val = np.asarray(res.x), float(res.fun)
    got = _band_solution_continuum(prior, omegas, fbars, decode(best_u))
    if got is None:
        return None
    return got[0], got[1], decode(best_u)


def solve_relu_multi(prior: Prior1D, omegas: Sequence[float], fbars: Sequence[float]):
    """Banded transport for K ascending ramp constraints.

    A backward recursion enumerates the candidate-system chains segment by
    segment (top first); the best chain seeds a joint refinement of the band
    crossing points, which repairs cases where the per-segment stationarity
    conditions are jointly suboptimal.  Atomic priors of moderate size are
    solved exactly by block enumeration instead.  Returns
    (map, measure, cost, states).
    """
    _check_1d_prior(prior)
    omegas = [float(w) for w in omegas]
    fbars = [float(f) for f in fbars]
    if len(omegas) != len(fbars) or not omegas:
        raise ValueError("omegas and fbars must be equal-length and nonempty")
    if any(b <= a for a, b in zip(omegas[:-1], omegas[1:])):
        raise InconsistentOrder(f"omegas must be strictly ascending, got {omegas}")
    if any(f < 0 for f in fbars):
        raise NegativeTarget("all targets must be >= 0")
    K = len(omegas)

    if K == 1:
        lam, x_star, mp, cost = solve_relu_single(prior, omegas[0], fbars[0])
        measure = measure_from_map(mp, prior)
        state = ReluRecursionState(
            k=1, x_star=x_star, lam=lam, x_next=math.inf, delta_omega=math.inf,
            delta_f_tilde=math.nan, system="single", cost=cost, pieces=mp.pieces,
        )
        return mp, measure, cost, (state,)

    n_atoms = prior.points.size if isinstance(prior, DiscreteAtoms) else 0
    if n_atoms and K * n_atoms**2 <= 2_000_000:
        targets, cost, starts = _discrete_exact_relu(prior, omegas, fbars)
        mp = _map_from_targets(prior.points, targets)
        measure = measure_from_map(mp, prior)
        states = []
        for k in range(K):
            a = starts[k]
            b = starts[k + 1] if k + 1 < K else prior.points.size
            seg_t = targets[a:b]
            seg_x = prior.points[a:b]
            lam_k = float(np.median(seg_t - seg_x)) if seg_t.size else 0.0
            states.append(
                ReluRecursionState(
                    k=k + 1,
                    x_star=float(seg_x[0]) if seg_x.size else omegas[k],
                    lam=lam_k,
                    x_next=float(prior.points[b]) if b < prior.points.size else math.inf,
                    delta_omega=(omegas[k + 1] - omegas[k]) if k + 1 < K else math.inf,
                    delta_f_tilde=math.nan,
                    system="discrete-exact",
                    cost=math.nan,
                    pieces=(),
                )
            )
        return mp, measure, cost, tuple(states)

    scale = _scale_of(prior, *omegas, *fbars)
    q0_top = _payoff_above(prior, omegas[-1])
    if abs(fbars[-1] - q0_top) <= 1e-14 * scale:
        top_candidates = [
            _Candidate("identity", 0.0, omegas[-1], (), 0.0)
        ]
    else:
        top_candidates = _single_relu_candidates(prior, omegas[-1], fbars[-1])
    if not top_candidates:
        raise InfeasibleTargets(
            f"no candidate system solvable for the top segment (k={K})", segment=K
        )

    best_chain: list[ReluRecursionState] | None = None
    best_key = (math.inf, math.inf)
    deepest_fail = K + 1

    def extend(k: int, x_next: float, states: list[ReluRecursionState], cost_so_far: float):
        nonlocal best_chain, best_key, deepest_fail
        if cost_so_far > best_key[0]:
            return
        if k == 0:
            key = (cost_so_far, sum(abs(s.lam) for s in states if math.isfinite(s.lam)))
            if key < best_key:
                best_key = key
                best_chain = list(states)
            return
        d_omega = omegas[k] - omegas[k - 1]
        dft = fbars[k - 1] - fbars[k] - d_omega * prior.mass_between(x_next, math.inf)
        cands = _interior_candidates(prior, omegas[k - 1], omegas[k], x_next, dft)
        if not cands:
            deepest_fail = min(deepest_fail, k)
            return
        for cand in cands:
            pieces, cost, x_eff = cand.pieces, cand.cost, cand.x_star
            if k == 1 and cand.x_star > omegas[0]:
                # identity below the first crossing point requires x_1* <= omega_1
                cost += _projection_cost(prior, omegas[0], omegas[0], cand.x_star)
                pieces = (MapPiece(omegas[0], cand.x_star, ProjectTo(omegas[0])),) + pieces
                x_eff = omegas[0]
            state = ReluRecursionState(
                k=k, x_star=x_eff, lam=cand.lam, x_next=x_next, delta_omega=d_omega,
                delta_f_tilde=dft, system=cand.system, cost=cost, pieces=pieces,
            )
            states.append(state)
            extend(k - 1, x_eff, states, cost_so_far + cost)
            states.pop()

    for cand in top_candidates:
        state = ReluRecursionState(
            k=K, x_star=cand.x_star, lam=cand.lam, x_next=math.inf,
            delta_omega=math.inf, delta_f_tilde=math.nan, system=cand.system,
            cost=cand.cost, pieces=cand.pieces,
        )
        extend(K - 1, cand.x_star, [state], cand.cost)

    seeds: list[list[float]] = []
    if best_chain is not None:
        chain_states = sorted(best_chain, key=lambda s: s.k)
        seeds.append([s.x_star for s in chain_states])
    # heuristic fallbacks in case no candidate chain closed
    lo_q = prior.quantile(1e-6) if hasattr(prior, "quantile") else omegas[0] - 1.0
    seeds.append([min(float(lo_q), omegas[0])] + list(omegas[:-1]))
    seeds.append([omegas[0] - (omegas[-1] - omegas[0]) - 1.0] + list(omegas[:-1]))

    refined = None
    for seed in seeds:
        got = _refine_boundaries(prior, omegas, fbars, seed)
        if got is not None and (refined is None or got[0] < refined[0]):
            refined = got
    if refined is None:
        raise InfeasibleTargets(
            f"targets admit no banded solution; first unsolvable segment k={deepest_fail}",
            segment=deepest_fail,
        )
    cost, band_pieces, bounds = refined
    mp = ShiftMap(pieces=tuple(band_pieces))
    measure = measure_from_map(mp, prior)
    states = []
    for k in range(K):
        b_lo = bounds[k]
        b_hi = bounds[k + 1] if k + 1 < K else math.inf
        lam_k = next(
            (p.action.offset for p in band_pieces
             if isinstance(p.action, ConstantShift) and b_lo - 1e-12 <= p.lo < b_hi),
            0.0,
        )
        states.append(
            ReluRecursionState(
                k=k + 1, x_star=b_lo, lam=lam_k, x_next=b_hi,
                delta_omega=(omegas[k + 1] - omegas[k]) if k + 1 < K else math.inf,
                delta_f_tilde=math.nan, system="band-joint", cost=math.nan, pieces=(),
            )
        )
    return mp, measure, cost, tuple(states)


def transport_cost(m: ShiftMap, prior: Prior1D) -> float:
    """Quadratic transport cost of a piecewise map under the prior."""
    _check_1d_prior(prior)
    covered = 0.0
    cost = 0.0
    for p in m.pieces:
        mass = prior.mass_between(p.lo, p.hi)
        covered += mass
        if isinstance(p.action, ConstantShift):
            cost += p.action.offset**2 * mass
        elif isinstance(p.action, ProjectTo):
            cost += _projection_cost(prior, p.action.point, p.lo, p.hi)
    if abs(covered - 1.0) > 1e-8:
        raise CoverageGap(f"map pieces cover prior mass {covered:.12f} != 1")
    return cost


def pushforward(m: ShiftMap | RadialClipMap | AxisClipMap, em: EmpiricalMeasure) -> EmpiricalMeasure:
    """Apply a transport map to every sample point; weights are preserved."""
    if isinstance(m, ShiftMap):
        if em.dim != 1:
            raise DimensionMismatch("1D map applied to 2D samples")
        new_pts = m.apply(em.x1()).reshape(-1, 1)
    else:
        if em.dim != 2:
            raise DimensionMismatch("2D map applied to 1D samples")
        new_pts = m.apply(em.points)
    return em.with_points(new_pts)


# ---------------------------------------------------------------------------
# 2D solvers
# ---------------------------------------------------------------------------


def solve_indicator_disk(prior: Gaussian2D, radius: float):
    """Support constrained to the closed disk: project outside mass radially."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    alpha = 1.0 - gaussian2d_disk_mass(prior, radius)
    alpha = min(max(alpha, 0.0), 1.0)
    measure = ProjectedMeasure2D(prior=prior, region="disk", param=radius, alpha=alpha)
    return measure, RadialClipMap(radius=radius)


def solve_indicator_halfplane(prior: Gaussian2D, threshold: float):
    """Support constrained to {z1 >= threshold}: clip the first coordinate."""
    from scipy.special import ndtr

    m = np.asarray(prior.mean)
    s = math.sqrt(np.asarray(prior.cov)[0, 0])
    alpha = float(ndtr((threshold - m[0]) / s))
    measure = ProjectedMeasure2D(prior=prior, region="halfplane", param=threshold, alpha=alpha)
    return measure, AxisClipMap(threshold=threshold)


# ---------------------------------------------------------------------------
# discrete oracle
# ---------------------------------------------------------------------------


def _monotone_dp(scores: np.ndarray) -> tuple[float, np.ndarray]:
    """Min-score nondecreasing assignment of (sorted) rows to (sorted) columns.

    Returns (total score, assignment of row i to column assign[i]).
    """
    n, m = scores.shape
    args = np.empty((n, m), dtype=np.int64)
    cols = np.arange(m)
    prev = scores[0].copy()
    for i in range(1, n):
        running = np.minimum.accumulate(prev)
        args[i] = np.maximum.accumulate(np.where(prev <= running, cols, -1))
        prev = scores[i] + running
    j = int(np.argmin(prev))
    total = float(prev[j])
    assign = np.empty(n, dtype=np.int64)
    assign[-1] = j
    for i in range(n - 1, 0, -1):
        assign[i - 1] = args[i][assign[i]]
    return total, assign


def _alloc_convex(d0: np.ndarray, step: float, total: int, caps: np.ndarray):
    """Exact integer minimizer of sum_a (d0_a + m_a*step)^2 with sum m_a = total.

    0 <= m_a <= caps_a.  The per-atom marginal step*(2*d0_a + (2m+1)*step)
    increases in m, so the optimum takes every marginal below a threshold;
    the threshold is located by bisection and leftover ties are broken one
    increment per atom.  Returns the allocation m (sorted allocations are
    nondecreasing wherever d0 is nonincreasing) or None when unreachable.
    """
    c = d0.size
    if total < 0 or total > int(np.sum(caps)):
        return None
    m = np.zeros(c, dtype=np.int64)
    if total == 0:
        return m

    def take(t: float) -> np.ndarray:
        # number of marginals <= t per atom
        mm = np.floor((t / step - 2.0 * d0 - step) / (2.0 * step)) + 1.0
        return np.clip(mm, 0, caps).astype(np.int64)

    t_lo = float(step * (2.0 * np.min(d0) + step)) - 1.0
    t_hi = float(step * (2.0 * np.max(d0 + caps * step) + step)) + 1.0
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if int(np.sum(take(mid))) <= total:
            t_lo = mid
        else:
            t_hi = mid
    m = take(t_lo)
    deficit = total - int(np.sum(m))
    if deficit > 0:
        nxt = step * (2.0 * d0 + (2 * m + 1) * step)
        nxt = np.where(m >= caps, np.inf, nxt)
        order = np.argsort(nxt, kind="stable")[:deficit]
        if np.any(~np.isfinite(nxt[order])):
            return None
        m[order] += 1
    return m


def _relu_block_oracle(xs, ws, grid, omegas, targets, tols):
    """Exact monotone-assignment search for ramp constraints on a uniform grid.

    Any optimal monotone assignment splits the (sorted) atoms into
    contiguous blocks: targets at or below omega_1, targets in each strike
    band, and targets above omega_K.  Every split is enumerated by brute
    force; within a block the payoff ladder is affine in the grid index, so
    the cost-minimal allocation at fixed block payoff is an exact convex
    integer program solved greedily.  Equal weights only (the payoff lattice
    is then uniform).

    Returns (cost, assignment, achieved) or None when no split lands every
    constraint within tolerance.
    """
    n = xs.size
    m = grid.size
    w = float(ws[0])
    step = float(grid[1] - grid[0]) if m > 1 else 1.0
    K = len(omegas)
    if K > 2:
        return None

    # entry index (first grid point strictly above omega) and band caps
    entry = [int(np.searchsorted(grid, om, side="right")) for om in omegas]
    if any(e >= m for e in entry):
        return None
    last_le = [int(np.searchsorted(grid, om, side="right")) - 1 for om in omegas]

    def idle_cost(i, om_idx):
        """Cheapest grid point at or below omega_{om_idx} for atom i."""
        j = last_le[om_idx]
        if j < 0:
            return None, None
        jj = int(np.clip(np.searchsorted(grid[: j + 1], xs[i]), 1, j + 1))
        cands = [c for c in (jj - 1, jj) if 0 <= c <= j]
        costs = [(xs[i] - grid[c]) ** 2 for c in cands]
        b = int(np.argmin(costs))
        return costs[b], cands[b]

    best = None

    def try_block(idx, om_idx, payoff_target, cap_hi, tol):
        """Allocate atoms ``idx`` above strike ``om_idx`` at given block payoff.

        cap_hi bounds the target index one past the band top.  Returns the
        cheapest allocation whose weighted payoff is within ``tol`` of the
        target: (cost, js, achieved_payoff_per_weight), or None.
        """
        c = idx.size
        e = entry[om_idx]
        beta = grid[e] - omegas[om_idx]
        if c == 0:
            return (0.0, np.zeros(0, dtype=np.int64), 0.0) if abs(payoff_target) <= tol else None
        caps = np.full(c, max(cap_hi - 1 - e, 0), dtype=np.int64)
        want = (payoff_target / w - c * beta) / step
        results = []
        for total in {int(math.floor(want)), int(math.ceil(want)), int(round(want))}:
            achieved = c * beta + total * step
            if abs(w * achieved - payoff_target) > tol:
                continue
            d0 = grid[e] - xs[idx]
            mm = _alloc_convex(d0, step, total, caps)
            if mm is None:
                continue
            mm = np.sort(mm)  # equal-offset ties must not break monotonicity
            cost = w * float(np.sum((d0 + mm * step) ** 2))
            results.append((cost, e + mm, achieved))
        if not results:
            return None
        return min(results, key=lambda t: t[0])

    order = np.arange(n)  # xs are sorted by the caller
    if K == 1:
        f1 = targets[0]
        for s in range(n + 1):
            active = order[s:]
            idle = order[:s]
            idle_costs = []
            js_idle = []
            ok = True
            for i in idle:
                ci, ji = idle_cost(i, 0)
                if ci is None:
                    ok = False
                    break
                idle_costs.append(ci)
                js_idle.append(ji)
            if not ok:
                continue
            got = try_block(active, 0, f1, m, tols[0])
            if got is None:
                continue
            cost_b, js_b, achieved = got
            total_cost = w * float(np.sum(idle_costs)) + cost_b
            if best is None or total_cost < best[0]:
                assign = np.empty(n, dtype=np.int64)
                assign[idle] = js_idle
                assign[active] = js_b
                if np.all(np.diff(assign) >= 0):
                    best = (total_cost, assign, np.asarray([w * achieved]))
        return best

    # K == 2: blocks idle | band (omega_1, omega_2] | top (> omega_2)
    f1, f2 = targets
    d_omega = omegas[1] - omegas[0]
    for s2 in range(n + 1):
        top = order[s2:]
        got_top = try_block(top, 1, f2, m, tols[1])
        if got_top is None:
            continue
        cost_top, js_top, ach2 = got_top
        # top block's contribution to the first constraint
        top_f1 = w * ach2 + w * top.size * d_omega
        band_target = f1 - top_f1
        for s1 in range(s2 + 1):
            band = order[s1:s2]
            idle = order[:s1]
            got_band = try_block(band, 0, band_target, last_le[1] + 1, tols[0])
            if got_band is None:
                continue
            cost_band, js_band, ach1 = got_band
            idle_costs = []
            js_idle = []
            ok = True
            for i in idle:
                ci, ji = idle_cost(i, 0)
                if ci is None:
                    ok = False
                    break
                idle_costs.append(ci)
                js_idle.append(ji)
            if not ok:
                continue
            total_cost = w * float(np.sum(idle_costs)) + cost_band + cost_top
            if best is None or total_cost < best[0]:
                assign = np.empty(n, dtype=np.int64)
                assign[idle] = js_idle
                assign[band] = js_band
                assign[top] = js_top
                if np.all(np.diff(assign) >= 0):
                    best = (
                        total_cost,
                        assign,
                        np.asarray([w * ach1 + top_f1, w * ach2]),
                    )
    return best


def brute_force_oracle(
    prior_atoms: Sequence[tuple[float, float]],
    target_grid: Sequence[float],
    constraints: Sequence[ConstraintSpec],
    tol: float | Sequence[float] | None = None,
    sweep_iters: int = 240,
):
    """Search monotone assignments of atoms to grid points.

    Minimizes sum_i w_i (x_i - g_{a(i)})^2 subject to every expectation
    constraint holding within ``tol`` (default: the payoff granularity of the
    grid).  Ramp-only constraint sets on a uniform grid with equal weights
    are solved exactly by enumerating every contiguous block split of the
    atoms and allocating each block on its payoff ladder.  Other inputs fall
    back to a multiplier sweep over the monotone-coupling lattice plus a
    bounded local-exchange repair.

    Returns (cost, assignment).  Raises GridInfeasible when no assignment
    within tolerance exists in the searched family.
    """
    atoms = sorted((float(x), float(w)) for x, w in prior_atoms)
    if not atoms:
        raise ValueError("need at least one atom")
    if len(atoms) > 200:
        raise ValueError("oracle is sized for <= 200 atoms")
    xs = np.asarray([a[0] for a in atoms])
    ws = np.asarray([a[1] for a in atoms])
    grid = np.asarray(sorted(float(g) for g in target_grid))
    if grid.size < 1:
        raise ValueError("empty grid")
    if any(c.dim != 1 for c in constraints):
        raise Unsupported("oracle handles 1D constraints only")

    rows = np.arange(len(xs))
    cost_m = ws[:, None] * (xs[:, None] - grid[None, :]) ** 2
    payoff_rows = [np.asarray(evaluate_batch(c, grid), dtype=float) for c in constraints]
    payoff_m = [ws[:, None] * row[None, :] for row in payoff_rows]
    targets = np.asarray([c.fbar for c in constraints])
    K = len(constraints)

    if tol is None:
        gaps = [float(np.max(np.abs(np.diff(row)))) if grid.size > 1 else 0.0 for row in payoff_rows]
        tols = np.asarray([max(2.0 * float(np.max(ws)) * g, 1e-12) for g in gaps])
    elif np.isscalar(tol):
        tols = np.full(K, float(tol))
    else:
        tols = np.asarray(tol, dtype=float)

    # exact block enumeration when the payoff ladder is uniform
    from .constraints import Relu as _Relu

    all_relu = K > 0 and all(isinstance(c.kind, _Relu) for c in constraints)
    uniform_grid = grid.size > 1 and np.allclose(np.diff(grid), grid[1] - grid[0], rtol=0, atol=1e-9 * max(1.0, abs(float(grid[-1] - grid[0]))))
    equal_w = bool(np.allclose(ws, ws[0]))
    if all_relu and uniform_grid and equal_w and K <= 2:
        omegas = [c.kind.omega for c in constraints]
        if all(b > a for a, b in zip(omegas[:-1], omegas[1:])):
            got = _relu_block_oracle(xs, ws, grid, omegas, targets, tols)
            if got is None:
                raise GridInfeasible(
                    f"no monotone block assignment meets tolerances {tols}"
                )
            cost, assign, _ = got
            return cost, assign

    def solve_at(theta: np.ndarray):
        s = cost_m.copy()
        for k in range(K):
            s = s - theta[k] * payoff_m[k]
        _, assign = _monotone_dp(s)
        payoff = np.asarray([float(np.sum(pm[rows, assign])) for pm in payoff_m])
        cost = float(np.sum(cost_m[rows, assign]))
        return assign, payoff, cost

    if K == 0:
        assign, _, cost = solve_at(np.zeros(0))
        return cost, assign

    def residual_score(p):
        return float(np.max(np.abs(p - targets) / np.maximum(tols, 1e-300)))

    theta = np.zeros(K)
    best = None

    def consider(assign, payoff, cost):
        nonlocal best
        score = residual_score(payoff)
        feasible = score <= 1.0
        key = (not feasible, cost if feasible else score)
        if best is None or key < best[0]:
            best = (key, assign.copy(), payoff, cost)

    assign, payoff, cost = solve_at(theta)
    consider(assign, payoff, cost)

    span = float(grid[-1] - grid[0]) if grid.size > 1 else 1.0
    theta_cap = 64.0 * (span + 1.0)
    passes = 1 if K == 1 else 4
    iters = sweep_iters if K == 1 else max(24, sweep_iters // (passes * K))
    for _ in range(passes):
        for k in range(K):
            a, b = -theta_cap, theta_cap
            for _ in range(iters):
                theta[k] = 0.5 * (a + b)
                assign, payoff, cost = solve_at(theta)
                consider(assign, payoff, cost)
                if payoff[k] < targets[k]:
                    a = theta[k]
                else:
                    b = theta[k]
            theta[k] = 0.5 * (a + b)

    _, assign, payoff, cost = best
    if residual_score(payoff) <= 1.0:
        return cost, assign

    repaired = _repair(cost_m, payoff_m, targets, tols, assign)
    if repaired is None:
        raise GridInfeasible(
            f"no monotone assignment within tolerances {tols}; best residuals {payoff - targets}"
        )
    return repaired


def _repair(cost_m, payoff_m, targets, tols, assign):
    """Single-atom (then atom-pair) grid moves to land inside the tolerance."""
    n, m = cost_m.shape
    rows = np.arange(n)
    base_cost = float(np.sum(cost_m[rows, assign]))
    base_payoff = np.asarray([float(np.sum(pm[rows, assign])) for pm in payoff_m])

    def bounds(i):
        lo = int(assign[i - 1]) if i > 0 else 0
        hi = int(assign[i + 1]) if i < n - 1 else m - 1
        return lo, hi

    best = None
    moves = []
    for i in range(n):
        lo, hi = bounds(i)
        js = np.arange(lo, hi + 1)
        d_cost = cost_m[i, js] - cost_m[i, assign[i]]
        d_pay = np.stack([pm[i, js] - pm[i, assign[i]] for pm in payoff_m])
        moves.append((i, js, d_cost, d_pay))
        new_pay = base_payoff[:, None] + d_pay
        ok = np.all(np.abs(new_pay - targets[:, None]) <= tols[:, None], axis=0)
        if np.any(ok):
            cand_cost = base_cost + d_cost[ok]
            jbest = int(np.argmin(cand_cost))
            tot = float(cand_cost[jbest])
            if best is None or tot < best[0]:
                a2 = assign.copy()
                a2[i] = js[ok][jbest]
                best = (tot, a2)
    if best is not None:
        return best

    # atom-pair moves over the most payoff-mobile rows
    moves.sort(key=lambda t: -float(np.max(np.abs(t[3]))))
    moves = moves[:24]
    for ii in range(len(moves)):
        i, js_i, dc_i, dp_i = moves[ii]
        for jj in range(ii + 1, len(moves)):
            l, js_l, dc_l, dp_l = moves[jj]
            pay = base_payoff[:, None, None] + dp_i[:, :, None] + dp_l[:, None, :]
            ok = np.all(np.abs(pay - targets[:, None, None]) <= tols[:, None, None], axis=0)
            if l == i + 1:
                ok &= js_i[:, None] <= js_l[None, :]
            elif i == l + 1:
                ok &= js_i[:, None] >= js_l[None, :]
            if not np.any(ok):
                continue
            cost2 = np.where(ok, base_cost + dc_i[:, None] + dc_l[None, :], np.inf)
            a_idx, b_idx = np.unravel_index(int(np.argmin(cost2)), cost2.shape)
            a2 = assign.copy()
            a2[i] = js_i[a_idx]
            a2[l] = js_l[b_idx]
            if np.all(np.diff(a2) >= 0):
                tot = float(cost2[a_idx, b_idx])
                if best is None or tot < best[0]:
                    best = (tot, a2)
    return best
