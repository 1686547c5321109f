"""Sample-based annealed penalty solver.

Minimizes the empirical objective

    L = (1/n) sum |x_i - y_i|^2  +  sum_k w_k ((1/n) sum f_k^eps(y_i) - fbar_k)^2
        + (lam_delta / t) B_delta + (lam_0 / t) B_0

by gradient descent with Armijo backtracking, inside an outer loop that
anneals the mollification parameter eps <- eps / beta.  B_delta penalizes
mass accumulation (a log barrier on the kernel energy (1/n^2) sum K_h) and
B_0 penalizes low density inside a domain D (a log barrier on the weighted
inverse-density sum).

All heavy terms are O(n^2) pairwise-kernel sums, evaluated with numpy; an
optional thread count chunks the kernel rows with a fixed-order reduction so
results match the sequential evaluation to the last bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constraints import (
    ConstraintKind,
    ConstraintSpec,
    evaluate_batch,
    mollified_batch,
    region_smoother_batch,
)
from .errors import BarrierInfeasible, DimensionMismatch, StepUnderflow
from .measures import EmpiricalMeasure, kde_bandwidth

__all__ = [
    "BarrierConfig",
    "SolverConfig",
    "SolverResult",
    "objective",
    "gradient",
    "armijo_step",
    "barrier_terms",
    "run",
]


@dataclass(frozen=True)
class BarrierConfig:
    """Smoothing-inequality barriers; None bounds are set from the start point."""

    lambda_delta: float = 1.0
    lambda_0: float = 1.0
    t: float = 0.01
    m_delta: float | None = None
    m_0: float | None = None
    domain: ConstraintKind | None = None
    phi_eps: float = 0.1

    def __post_init__(self):
        if self.lambda_delta < 0 or self.lambda_0 < 0 or self.t <= 0 or self.phi_eps <= 0:
            raise ValueError("barrier weights must be >= 0 and t, phi_eps > 0")


@dataclass(frozen=True)
class SolverConfig:
    """Every free parameter of the annealed descent.

    None values resolve from the data: eps0 = range/4, tol = 1e-8 * range,
    bandwidth = Silverman's rule on the prior samples.
    """

    eps0: float | None = None
    beta: float = 3.0
    outer_rounds: int = 8
    max_inner: int = 5000
    tol: float | None = None
    armijo_alpha: float = 0.3
    step_expand: float = 0.1
    eta0: float = 1e-2
    barrier: BarrierConfig | None = None
    bandwidth: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.beta <= 1:
            raise ValueError("beta must exceed 1")
        if self.outer_rounds < 1 or self.max_inner < 1:
            raise ValueError("outer_rounds and max_inner must be >= 1")
        if not 0 < self.armijo_alpha <= 0.5:
            raise ValueError("armijo_alpha must lie in (0, 0.5]")
        if self.step_expand < 0 or self.eta0 <= 0:
            raise ValueError("step_expand must be >= 0 and eta0 > 0")

    def resolved(self, x: EmpiricalMeasure) -> "SolverConfig":
        """Fill data-dependent defaults from the prior samples."""
        span = float(np.max(np.ptp(x.points, axis=0))) if x.n > 1 else 1.0
        span = max(span, 1e-12)
        out = self
        if out.eps0 is None:
            out = replace(out, eps0=span / 4.0)
        if out.tol is None:
            out = replace(out, tol=1e-8 * span)
        if out.bandwidth is None and (self.barrier is not None):
            out = replace(out, bandwidth=kde_bandwidth(x))
        return out


@dataclass
class SolverResult:
    y: EmpiricalMeasure
    trace: list
    residuals: list  # per outer round: list of exact (eps=0) residuals
    transport_cost: float
    converged: list  # per outer round
    config: SolverConfig
    warnings: list = field(default_factory=list)

    def trace_jsonable(self, max_rows: int = 10_000) -> list[dict]:
        rows = self.trace
        if len(rows) > max_rows:
            idx = np.linspace(0, len(rows) - 1, max_rows).astype(int)
            rows = [rows[i] for i in idx]
        return [
            {"round": r, "iter": i, "objective": o, "eta": e, "grad_norm": g}
            for (r, i, o, e, g) in rows
        ]


def _pairwise_kernel(y: np.ndarray, h: float, threads: int = 1) -> np.ndarray:
    """Gaussian kernel matrix K_h(y_i - y_j), including the (2 pi h^2)^(-d/2) norm."""
    n, d = y.shape
    norm = (2.0 * math.pi * h * h) ** (-0.5 * d)

    def rows(lo, hi):
        diff = y[lo:hi, None, :] - y[None, :, :]
        return norm * np.exp(-0.5 * np.sum(diff**2, axis=2) / (h * h))

    if threads <= 1 or n < 256:
        return rows(0, n)
    chunks = np.linspace(0, n, threads + 1).astype(int)
    out = np.empty((n, n))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [(lo, hi, pool.submit(rows, lo, hi)) for lo, hi in zip(chunks[:-1], chunks[1:]) if hi > lo]
        for lo, hi, fut in futs:
            out[lo:hi] = fut.result()
    return out


class _Objective:
    """Shared state for objective/gradient evaluations at one (eps, config)."""

    def __init__(self, x: np.ndarray, constraints: Sequence[ConstraintSpec],
                 cfg: SolverConfig, eps: float, m_delta: float | None = None,
                 m_0: float | None = None):
        self.x = x
        self.n, self.d = x.shape
        self.constraints = list(constraints)
        self.cfg = cfg
        self.eps = eps
        self.h = cfg.bandwidth
        self.m_delta = m_delta
        self.m_0 = m_0

    # barrier functionals -------------------------------------------------
    def kernel_energy(self, y: np.ndarray, w: np.ndarray | None = None) -> float:
        w = self._kernel(y) if w is None else w
        return float(np.sum(w)) / (self.n**2)

    def gap_functional(self, y: np.ndarray, w: np.ndarray | None = None) -> float:
        w = self._kernel(y) if w is None else w
        q = np.sum(w, axis=1) / self.n
        phi, _ = region_smoother_batch(self.cfg.barrier.domain, self.cfg.barrier.phi_eps, y)
        return float(np.sum(phi / q**2)) / self.n

    def _kernel(self, y: np.ndarray) -> np.ndarray:
        return _pairwise_kernel(y, self.h, self.cfg.threads)

    # objective ------------------------------------------------------------
    def value(self, y: np.ndarray) -> float:
        n = self.n
        val = float(np.sum((y - self.x) ** 2)) / n
        for spec in self.constraints:
            if self.eps > 0:
                f, _ = mollified_batch(spec, self.eps, y)
            else:
                f = evaluate_batch(spec, y)
            r = float(np.mean(f)) - spec.fbar
            val += spec.weight * r * r
        bc = self.cfg.barrier
        if bc is not None:
            w = self._kernel(y)
            e = self.kernel_energy(y, w)
            if e >= self.m_delta:
                raise BarrierInfeasible(
                    f"accumulation bound violated: kernel energy {e:.6g} >= M_delta {self.m_delta:.6g}"
                )
            val += bc.lambda_delta / bc.t * (-math.log(self.m_delta - e))
            if bc.domain is not None:
                g = self.gap_functional(y, w)
                if g >= self.m_0:
                    raise BarrierInfeasible(
                        f"low-density bound violated: gap functional {g:.6g} >= M_0 {self.m_0:.6g}"
                    )
                val += bc.lambda_0 / bc.t * (-math.log(self.m_0 - g))
        return val

    def value_or_inf(self, y: np.ndarray) -> float:
        try:
            return self.value(y)
        except BarrierInfeasible:
            return math.inf

    def grad(self, y: np.ndarray) -> np.ndarray:
        n, d = self.n, self.d
        g = 2.0 * (y - self.x) / n
        for spec in self.constraints:
            if self.eps > 0:
                f, df = mollified_batch(spec, self.eps, y)
            else:
                f = evaluate_batch(spec, y)
                df = np.zeros_like(y)
            r = float(np.mean(f)) - spec.fbar
            g += (2.0 * spec.weight * r / n) * df
        bc = self.cfg.barrier
        if bc is not None:
            h = self.h
            w = self._kernel(y)
            rowsum = np.sum(w, axis=1)
            wy = w @ y
            s = rowsum[:, None] * y - wy  # S_i = sum_j W_ij (y_i - y_j)
            e = float(np.sum(w)) / n**2
            if e >= self.m_delta:
                raise BarrierInfeasible(
                    f"accumulation bound violated: kernel energy {e:.6g} >= M_delta {self.m_delta:.6g}"
                )
            de = -(2.0 / (n**2 * h**2)) * s
            g += bc.lambda_delta / bc.t * de / (self.m_delta - e)
            if bc.domain is not None:
                q = rowsum / n
                phi, dphi = region_smoother_batch(bc.domain, bc.phi_eps, y)
                gap = float(np.sum(phi / q**2)) / n
                if gap >= self.m_0:
                    raise BarrierInfeasible(
                        f"low-density bound violated: gap functional {gap:.6g} >= M_0 {self.m_0:.6g}"
                    )
                c = phi / q**3  # weights of the inverse-density chain rule
                cy = w @ (c[:, None] * y)
                csum = w @ c
                cross = cy - csum[:, None] * y  # sum_i c_i W_il (y_i - y_l)
                dgap = (
                    dphi / q[:, None] ** 2
                    + (2.0 / (n * h**2)) * c[:, None] * s
                    - (2.0 / (n * h**2)) * cross
                ) / n
                g += bc.lambda_0 / bc.t * dgap / (self.m_0 - gap)
        return g


def _as_points(y) -> np.ndarray:
    if isinstance(y, EmpiricalMeasure):
        return y.points
    arr = np.asarray(y, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def _prepare(x: EmpiricalMeasure, constraints, cfg: SolverConfig, eps: float):
    cfg = cfg.resolved(x)
    for spec in constraints:
        if spec.dim != x.dim:
            raise DimensionMismatch(
                f"constraint {type(spec.kind).__name__} is {spec.dim}D, samples are {x.dim}D"
            )
    m_delta = m_0 = None
    if cfg.barrier is not None:
        ob0 = _Objective(x.points, constraints, cfg, eps)
        w = ob0._kernel(x.points)
        e0 = ob0.kernel_energy(x.points, w)
        m_delta = cfg.barrier.m_delta if cfg.barrier.m_delta is not None else 2.0 * e0
        if cfg.barrier.domain is not None:
            g0 = ob0.gap_functional(x.points, w)
            m_0 = cfg.barrier.m_0 if cfg.barrier.m_0 is not None else 2.0 * g0
    return cfg, m_delta, m_0


def objective(y, x: EmpiricalMeasure, constraints, cfg: SolverConfig, eps: float) -> float:
    """Full annealed objective at mollification eps (eps=0: exact constraint values)."""
    cfg, m_delta, m_0 = _prepare(x, constraints, cfg, eps)
    ob = _Objective(x.points, constraints, cfg, eps, m_delta, m_0)
    return ob.value(_as_points(y))


def gradient(y, x: EmpiricalMeasure, constraints, cfg: SolverConfig, eps: float) -> np.ndarray:
    """Exact analytic gradient of the full objective, shape (n, d)."""
    cfg, m_delta, m_0 = _prepare(x, constraints, cfg, eps)
    ob = _Objective(x.points, constraints, cfg, eps, m_delta, m_0)
    return ob.grad(_as_points(y))


def barrier_terms(y, cfg: SolverConfig) -> tuple[float, float]:
    """(B_delta, B_0) log-barrier values at the given samples.

    Requires strict feasibility of both bounds; raises BarrierInfeasible
    naming the violated bound otherwise.
    """
    if cfg.barrier is None:
        raise ValueError("config has no barrier section")
    pts = _as_points(y)
    em = y if isinstance(y, EmpiricalMeasure) else EmpiricalMeasure(points=pts)
    cfg = cfg.resolved(em)
    if cfg.barrier.m_delta is None or (cfg.barrier.domain is not None and cfg.barrier.m_0 is None):
        raise ValueError("barrier_terms needs explicit m_delta/m_0 bounds")
    ob = _Objective(pts, [], cfg, 1.0, cfg.barrier.m_delta, cfg.barrier.m_0)
    w = ob._kernel(pts)
    e = ob.kernel_energy(pts, w)
    if e >= cfg.barrier.m_delta:
        raise BarrierInfeasible(
            f"accumulation bound violated: kernel energy {e:.6g} >= M_delta {cfg.barrier.m_delta:.6g}"
        )
    b_delta = -math.log(cfg.barrier.m_delta - e)
    b_0 = math.nan
    if cfg.barrier.domain is not None:
        g = ob.gap_functional(pts, w)
        if g >= cfg.barrier.m_0:
            raise BarrierInfeasible(
                f"low-density bound violated: gap functional {g:.6g} >= M_0 {cfg.barrier.m_0:.6g}"
            )
        b_0 = -math.log(cfg.barrier.m_0 - g)
    return b_delta, b_0


def armijo_step(y: np.ndarray, grad: np.ndarray, eta_prev: float, cfg: SolverConfig,
                objective_fn) -> tuple[float, np.ndarray]:
    """Backtracking line search with sufficient decrease.

    Starts at (1 + step_expand) * eta_prev and halves until
    L(y - eta g) <= L(y) - alpha * eta * |g|^2.  Barrier-infeasible trial
    points count as +inf.  Raises StepUnderflow below 1e-18.
    """
    gnorm2 = float(np.sum(grad**2))
    if gnorm2 == 0.0:
        raise ValueError("gradient is zero; caller should have stopped")
    l0 = objective_fn(y)
    eta = (1.0 + cfg.step_expand) * eta_prev
    while eta >= 1e-18:
        y_new = y - eta * grad
        l_new = objective_fn(y_new)
        if l_new <= l0 - cfg.armijo_alpha * eta * gnorm2:
            return eta, y_new
        eta *= 0.5
    raise StepUnderflow(
        f"no acceptable step above 1e-18 (|g|^2 = {gnorm2:.3g}, L = {l0:.6g})"
    )


def run(x: EmpiricalMeasure, constraints: Sequence[ConstraintSpec], cfg: SolverConfig) -> SolverResult:
    """Annealed gradient descent; returns moved samples plus diagnostics.

    Outer loop: eps <- eps / beta for ``outer_rounds`` rounds.  Inner loop:
    gradient descent with Armijo backtracking until the update norm falls
    below tol or ``max_inner`` iterations.  Exact (eps = 0) constraint
    residuals are recorded after every round.  Deterministic in its inputs.
    """
    warnings: list[str] = []
    cfg, m_delta, m_0 = _prepare(x, constraints, cfg, eps=1.0)
    if cfg.barrier is not None:
        # feasibility phase: bounds must be strict at the start point
        ob0 = _Objective(x.points, constraints, cfg, 1.0, m_delta, m_0)
        w = ob0._kernel(x.points)
        e0 = ob0.kernel_energy(x.points, w)
        if e0 >= m_delta:
            m_delta = 1.05 * e0
            warnings.append(
                f"accumulation bound raised to 1.05x measured kernel energy ({m_delta:.6g})"
            )
        if cfg.barrier.domain is not None:
            g0 = ob0.gap_functional(x.points, w)
            if g0 >= m_0:
                m_0 = 1.05 * g0
                warnings.append(
                    f"low-density bound raised to 1.05x measured gap functional ({m_0:.6g})"
                )

    y = x.points.copy()
    eps = cfg.eps0
    trace: list[tuple] = []
    residual_rounds: list[list[float]] = []
    converged_rounds: list[bool] = []

    for round_idx in range(cfg.outer_rounds):
        ob = _Objective(x.points, constraints, cfg, eps, m_delta, m_0)
        eta = cfg.eta0
        converged = False
        for it in range(cfg.max_inner):
            g = ob.grad(y)
            gnorm = float(np.linalg.norm(g))
            if gnorm == 0.0:
                converged = True
                break
            eta, y_new = armijo_step(y, g, eta, cfg, ob.value_or_inf)
            trace.append((round_idx, it, ob.value(y_new), eta, gnorm))
            step = float(np.linalg.norm(y_new - y))
            y = y_new
            if step < cfg.tol:
                converged = True
                break
        converged_rounds.append(converged)
        residual_rounds.append(
            [float(np.mean(evaluate_batch(spec, y))) - spec.fbar for spec in constraints]
        )
        eps = eps / cfg.beta

    cost = float(np.mean(np.sum((y - x.points) ** 2, axis=1)))
    y_meas = EmpiricalMeasure(points=y, weights=x.weights, seed=x.seed, origin="solver")
    return SolverResult(
        y=y_meas,
        trace=trace,
        residuals=residual_rounds,
        transport_cost=cost,
        converged=converged_rounds,
        config=cfg if cfg.barrier is None else replace(
            cfg, barrier=replace(cfg.barrier, m_delta=m_delta, m_0=m_0)
        ),
        warnings=warnings,
    )
