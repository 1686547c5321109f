"""Option payoffs, pricing against calibrated measures, and error reports.

Payoffs are terminal-distribution functionals of the asset price: vanilla
calls, down-and-out calls, cash-or-nothing and asset-or-nothing digitals.
Prices are expectations under an empirical measure (weighted sums), a mixed
analytic measure (piecewise quadrature plus atoms), a tilted baseline
solution, or a closed-form lognormal.  No discounting: quotes are assumed
already expressed as undiscounted expected payoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .analytic import MixedMeasure
from .constraints import ConstraintSpec, Relu
from .errors import EmptyMeasure, Unsupported
from .kl import KlSolution, kl_expectation, kl_relu_multi
from .measures import EmpiricalMeasure, Lognormal, partial_expectation
from .solver import SolverConfig, run

__all__ = [
    "VanillaCall",
    "DownAndOutCall",
    "CashOrNothing",
    "AssetOrNothing",
    "OptionSpec",
    "PriceReport",
    "payoff",
    "payoff_batch",
    "price",
    "closed_form_price",
    "calibrate",
    "report",
]


@dataclass(frozen=True)
class VanillaCall:
    strike: float

    def __post_init__(self):
        if self.strike <= 0:
            raise ValueError("strike must be positive")


@dataclass(frozen=True)
class DownAndOutCall:
    """max(x - strike, 0) paid only when the terminal price clears ``barrier``."""

    barrier: float
    strike: float

    def __post_init__(self):
        if self.strike <= 0 or self.barrier <= 0:
            raise ValueError("strike and barrier must be positive")


@dataclass(frozen=True)
class CashOrNothing:
    cash: float
    strike: float

    def __post_init__(self):
        if self.cash <= 0 or self.strike <= 0:
            raise ValueError("cash and strike must be positive")


@dataclass(frozen=True)
class AssetOrNothing:
    strike: float

    def __post_init__(self):
        if self.strike <= 0:
            raise ValueError("strike must be positive")


OptionSpec = Union[VanillaCall, DownAndOutCall, CashOrNothing, AssetOrNothing]
Measure = Union[EmpiricalMeasure, MixedMeasure, KlSolution]


def payoff_batch(opt: OptionSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if isinstance(opt, VanillaCall):
        return np.maximum(x - opt.strike, 0.0)
    if isinstance(opt, DownAndOutCall):
        return np.maximum(x - opt.strike, 0.0) * (x >= opt.barrier)
    if isinstance(opt, CashOrNothing):
        return opt.cash * (x >= opt.strike).astype(float)
    if isinstance(opt, AssetOrNothing):
        return x * (x >= opt.strike)
    raise Unsupported(f"unknown option kind {opt!r}")


def payoff(opt: OptionSpec, x: float) -> float:
    return float(payoff_batch(opt, np.asarray([x]))[0])


def _kinks(opt: OptionSpec) -> list[float]:
    if isinstance(opt, VanillaCall):
        return [opt.strike]
    if isinstance(opt, DownAndOutCall):
        return [opt.strike, opt.barrier]
    return [opt.strike]


def price(opt: OptionSpec, m: Measure) -> float:
    """Expected payoff under the measure."""
    if isinstance(m, EmpiricalMeasure):
        if m.n == 0:
            raise EmptyMeasure("cannot price against an empty sample")
        if m.dim != 1:
            raise Unsupported("pricing requires 1D measures")
        return float(np.dot(m.weights, payoff_batch(opt, m.x1())))
    if isinstance(m, MixedMeasure):
        return m.expectation(lambda x: payoff_batch(opt, x), kinks=_kinks(opt))
    if isinstance(m, KlSolution):
        return kl_expectation(m, lambda x: payoff_batch(opt, x), kinks=_kinks(opt))
    raise Unsupported(f"cannot price against {type(m).__name__}")


def closed_form_price(opt: OptionSpec, prior: Lognormal) -> float:
    """Exact lognormal price from partial expectations and tail probabilities."""
    if not isinstance(prior, Lognormal):
        raise Unsupported("closed forms require a lognormal measure")

    def tail(a: float) -> float:
        return 1.0 - float(prior.cdf(a)) if a > 0 else 1.0

    if isinstance(opt, VanillaCall):
        return partial_expectation(prior, opt.strike) - opt.strike * tail(opt.strike)
    if isinstance(opt, DownAndOutCall):
        a = max(opt.barrier, opt.strike)
        return partial_expectation(prior, a) - opt.strike * tail(a)
    if isinstance(opt, CashOrNothing):
        return opt.cash * tail(opt.strike)
    if isinstance(opt, AssetOrNothing):
        return partial_expectation(prior, opt.strike)
    raise Unsupported(f"unknown option kind {opt!r}")


def calibrate(
    prior_samples: EmpiricalMeasure,
    quotes: Sequence[tuple[float, float]],
    method: str,
    cfg: SolverConfig | None = None,
    y_max: float | None = None,
    weights: Sequence[float] | None = None,
):
    """Recover a pricing measure from vanilla quotes.

    quotes: ascending (strike, expected payoff) pairs.  Methods:
    "ot" (annealed transport, barriers off), "ot_smooth" (barriers on),
    "kl" (exponential tilt of a lognormal fit to the samples).  Returns an
    EmpiricalMeasure for the transport methods, a KlSolution for "kl".
    Penalty weights default to 1200 / target, which holds every quote's
    relative residual near the percent level.
    """
    if not quotes:
        raise ValueError("need at least one quote")
    strikes = [float(s) for s, _ in quotes]
    targets = [float(f) for _, f in quotes]
    if any(b <= a for a, b in zip(strikes[:-1], strikes[1:])):
        raise ValueError("strikes must be strictly ascending")
    if weights is None:
        weights = [_default_weight(f) for f in targets]
    method = method.lower()
    if method in ("ot", "wasserstein", "ot_smooth", "smooth", "smooth_wasserstein"):
        from dataclasses import replace

        base = cfg or SolverConfig()
        if method in ("ot", "wasserstein"):
            if base.barrier is not None:
                base = replace(base, barrier=None)
        elif base.barrier is None:
            from .solver import BarrierConfig

            base = replace(base, barrier=BarrierConfig())
        cons = [ConstraintSpec(Relu(s), f, weight=w) for s, f, w in zip(strikes, targets, weights)]
        return run(prior_samples, cons, base).y
    if method == "kl":
        logx = np.log(prior_samples.x1())
        fitted = Lognormal(float(np.mean(logx)), float(np.std(logx, ddof=1)))
        return kl_relu_multi(fitted, strikes, targets, y_max)
    raise ValueError(f"unknown calibration method {method!r}")


def _default_weight(target: float) -> float:
    # inverse-target scaling keeps every quote's relative residual at a
    # comparable (percent) level at the penalty equilibrium
    return min(1200.0 / max(target, 1e-6), 1e7)


@dataclass(frozen=True)
class PriceReport:
    """Per (option, method) prices and relative errors vs the surrogate."""

    options: tuple
    methods: tuple
    prices: dict  # (option index, method) -> price
    reference: dict  # option index -> surrogate closed-form price

    def rows(self) -> list[dict]:
        out = []
        for i, opt in enumerate(self.options):
            ref = self.reference[i]
            for method in self.methods:
                p = self.prices[(i, method)]
                rel = (p - ref) / ref if ref != 0 else math.nan
                out.append(
                    {
                        "option": type(opt).__name__,
                        "params": _opt_params(opt),
                        "method": method,
                        "price": p,
                        "surrogate_price": ref,
                        "rel_error": rel,
                    }
                )
        return out


def _opt_params(opt: OptionSpec) -> dict:
    return {k: getattr(opt, k) for k in opt.__dataclass_fields__}


def report(options: Sequence[OptionSpec], measures: dict, surrogate: Lognormal) -> PriceReport:
    """Price every option under every measure; errors are relative to the
    surrogate's closed forms."""
    prices = {}
    reference = {}
    methods = tuple(measures.keys())
    for i, opt in enumerate(options):
        reference[i] = closed_form_price(opt, surrogate)
        for method, m in measures.items():
            prices[(i, method)] = price(opt, m)
    return PriceReport(options=tuple(options), methods=methods, prices=prices, reference=reference)
