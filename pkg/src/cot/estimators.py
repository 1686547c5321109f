"""scikit-learn style wrappers around the sample-based algorithms.

``ConstrainedTransport`` follows the TSNE pattern: the solve moves the
training samples themselves, so ``fit`` exposes the moved samples as
``embedding_`` and ``fit_transform`` returns them; there is no out-of-sample
transform.  ``ExponentialTiltDensity`` follows the KernelDensity pattern
(fit / score_samples / sample).
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .constraints import ConstraintSpec
from .kl import kl_density, kl_relu_multi, kl_sample
from .measures import EmpiricalMeasure, Lognormal
from .solver import BarrierConfig, SolverConfig, run

__all__ = ["ConstrainedTransport", "ExponentialTiltDensity"]


class ConstrainedTransport(BaseEstimator):
    """Move samples to satisfy expectation constraints at minimal quadratic cost.

    Parameters mirror the solver configuration; ``constraints`` is a
    sequence of :class:`cot.constraints.ConstraintSpec`.

    Attributes
    ----------
    embedding_ : ndarray of shape (n, d)
        The moved samples.
    residuals_ : list of float
        Final exact constraint residuals.
    transport_cost_ : float
        Mean squared displacement.
    """

    def __init__(self, constraints=(), eps0=None, beta=3.0, outer_rounds=8,
                 max_inner=5000, tol=None, armijo_alpha=0.3, step_expand=0.1,
                 eta0=1e-2, smoothing=False, barrier_t=0.01, barrier_domain=None,
                 barrier_weight=1.0, phi_eps=0.1, bandwidth=None, threads=1):
        self.constraints = constraints
        self.eps0 = eps0
        self.beta = beta
        self.outer_rounds = outer_rounds
        self.max_inner = max_inner
        self.tol = tol
        self.armijo_alpha = armijo_alpha
        self.step_expand = step_expand
        self.eta0 = eta0
        self.smoothing = smoothing
        self.barrier_t = barrier_t
        self.barrier_domain = barrier_domain
        self.barrier_weight = barrier_weight
        self.phi_eps = phi_eps
        self.bandwidth = bandwidth
        self.threads = threads

    def _config(self) -> SolverConfig:
        barrier = None
        if self.smoothing:
            barrier = BarrierConfig(
                lambda_delta=self.barrier_weight,
                lambda_0=self.barrier_weight if self.barrier_domain is not None else 0.0,
                t=self.barrier_t,
                domain=self.barrier_domain,
                phi_eps=self.phi_eps,
            )
        return SolverConfig(
            eps0=self.eps0, beta=self.beta, outer_rounds=self.outer_rounds,
            max_inner=self.max_inner, tol=self.tol, armijo_alpha=self.armijo_alpha,
            step_expand=self.step_expand, eta0=self.eta0, barrier=barrier,
            bandwidth=self.bandwidth, threads=self.threads,
        )

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] not in (1, 2):
            raise ValueError("samples must be 1- or 2-dimensional")
        for spec in self.constraints:
            if not isinstance(spec, ConstraintSpec):
                raise TypeError("constraints must be ConstraintSpec instances")
        measure = EmpiricalMeasure(points=X)
        result = run(measure, list(self.constraints), self._config())
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.embedding_ = result.y.points
        self.residuals_ = result.residuals[-1] if result.residuals else []
        self.transport_cost_ = result.transport_cost
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


class ExponentialTiltDensity(BaseEstimator):
    """Calibrated density: exponential tilt of a lognormal fit to the samples.

    ``fit(X)`` fits a lognormal to 1D positive samples (or uses ``prior``
    when given) and solves the tilt multipliers matching the quotes.
    """

    def __init__(self, strikes=(), targets=(), prior=None, y_max=None):
        self.strikes = strikes
        self.targets = targets
        self.prior = prior
        self.y_max = y_max

    def fit(self, X=None, y=None):
        if self.prior is not None:
            base = self.prior
        else:
            X = check_array(X, ensure_2d=False, dtype=float).ravel()
            if np.any(X <= 0):
                raise ValueError("lognormal fit needs positive samples")
            logx = np.log(X)
            base = Lognormal(float(np.mean(logx)), float(np.std(logx, ddof=1)))
        self.prior_ = base
        self.solution_ = kl_relu_multi(base, list(self.strikes), list(self.targets), self.y_max)
        self.lambdas_ = np.asarray(self.solution_.lambdas)
        return self

    def score_samples(self, X):
        check_is_fitted(self, "solution_")
        X = check_array(X, ensure_2d=False, dtype=float).ravel()
        dens = np.asarray(kl_density(self.solution_, X))
        with np.errstate(divide="ignore"):
            return np.log(dens)

    def sample(self, n_samples=1, random_state=0):
        check_is_fitted(self, "solution_")
        return kl_sample(self.solution_, n_samples, int(random_state)).x1()

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))
