"""Constrained-transport density estimation.

Estimate a probability measure at minimal quadratic transport cost from a
prior, subject to expectation equality constraints and optional
density-smoothing inequalities.  Closed-form solvers cover interval/region
restrictions and ramp-payoff (vanilla-call) constraints; a sample-based
annealed penalty solver handles the general case; an exponential-tilt
baseline and an option-pricing pipeline round out the toolkit.

Sampling determinism: all randomness flows through numpy's PCG64
(`numpy.random.default_rng(seed)`), so identical seeds give bit-identical
streams across platforms and runs.
"""

__version__ = "0.1.0"

from .constraints import (
    ConstraintSpec,
    Heaviside,
    IndicatorOutsideDisk,
    IndicatorOutsideHalfplane,
    IndicatorOutsideInterval,
    Relu,
    evaluate,
    mollified,
    residual,
    target_from_surrogate,
)
from .measures import (
    DiscreteAtoms,
    EmpiricalMeasure,
    Gaussian2D,
    KdeModel,
    Lognormal,
    Normal1D,
    UniformDisk,
    empirical_expectation,
    kde_bandwidth,
    kde_density,
    partial_expectation,
    sample,
)
from .analytic import (
    AxisClipMap,
    ConstantShift,
    Identity,
    MapPiece,
    MixedMeasure,
    ProjectTo,
    ProjectedMeasure2D,
    RadialClipMap,
    ShiftMap,
    brute_force_oracle,
    measure_from_map,
    pushforward,
    solve_indicator_disk,
    solve_indicator_halfplane,
    solve_indicator_interval,
    solve_relu_multi,
    solve_relu_single,
    transport_cost,
)
from .kl import KlSolution, kl_density, kl_indicator, kl_relu_multi, kl_relu_single, kl_sample
from .solver import BarrierConfig, SolverConfig, SolverResult, run
from .pricing import (
    AssetOrNothing,
    CashOrNothing,
    DownAndOutCall,
    PriceReport,
    VanillaCall,
    calibrate,
    closed_form_price,
    payoff,
    price,
    report,
)
from .estimators import ConstrainedTransport, ExponentialTiltDensity

__all__ = [
    "__version__",
    "ConstraintSpec", "Relu", "Heaviside", "IndicatorOutsideInterval",
    "IndicatorOutsideDisk", "IndicatorOutsideHalfplane",
    "evaluate", "mollified", "residual", "target_from_surrogate",
    "EmpiricalMeasure", "DiscreteAtoms", "Lognormal", "Normal1D", "Gaussian2D",
    "UniformDisk", "KdeModel", "sample", "partial_expectation", "kde_bandwidth",
    "kde_density", "empirical_expectation",
    "ShiftMap", "MapPiece", "Identity", "ConstantShift", "ProjectTo",
    "RadialClipMap", "AxisClipMap", "MixedMeasure", "ProjectedMeasure2D",
    "measure_from_map", "pushforward", "transport_cost",
    "solve_indicator_interval", "solve_relu_single", "solve_relu_multi",
    "solve_indicator_disk", "solve_indicator_halfplane", "brute_force_oracle",
    "KlSolution", "kl_indicator", "kl_relu_single", "kl_relu_multi",
    "kl_density", "kl_sample",
    "SolverConfig", "BarrierConfig", "SolverResult", "run",
    "VanillaCall", "DownAndOutCall", "CashOrNothing", "AssetOrNothing",
    "PriceReport", "payoff", "price", "closed_form_price", "calibrate", "report",
    "ConstrainedTransport", "ExponentialTiltDensity",
]
