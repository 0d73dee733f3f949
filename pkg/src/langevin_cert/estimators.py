"""scikit-learn style wrappers around the functional API.

Only the parts that fit the fit/predict pattern are wrapped; the functional
modules remain the primary interface.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .certificate import ModelParams, build_certificate, growth_constants_for
from .dynamics import Autocorrelation, SamplerConfig, sample_invariant
from .harness import WindowPolicy, compare_certificate, estimate_decay_rate
from .spectral import local_poincare_estimate


class DecayRateEstimator(BaseEstimator):
    """Fit an exponential decay rate to an autocovariance curve.

    ``fit(t, C, stderr)`` sets ``rate_``, ``stderr_``, ``intercept_`` and
    ``window_``; ``predict(t)`` returns the fitted ``C(t)``.
    """

    def __init__(self, snr=5.0, t_min=None, t_max=None, gamma=None):
        self.snr = snr
        self.t_min = t_min
        self.t_max = t_max
        self.gamma = gamma

    def fit(self, t, C, stderr=None):
        t = np.asarray(t, dtype=float).ravel()
        C = np.asarray(C, dtype=float).ravel()
        stderr = np.zeros_like(C) if stderr is None else np.asarray(stderr, dtype=float).ravel()
        if not len(t) == len(C) == len(stderr):
            raise ValueError("t, C and stderr must have equal length")
        est = estimate_decay_rate(Autocorrelation(t, C, stderr, 0),
                                  WindowPolicy(self.snr, self.t_min, self.t_max), self.gamma)
        self.estimate_ = est
        self.rate_ = est.rate
        self.stderr_ = est.stderr
        self.window_ = (est.t_lo, est.t_hi)
        mask = (t >= est.t_lo) & (t <= est.t_hi)
        self.intercept_ = float(np.mean(np.log(C[mask]) + self.rate_ * t[mask]))
        return self

    def predict(self, t):
        check_is_fitted(self, "rate_")
        return np.exp(self.intercept_ - self.rate_ * np.asarray(t, dtype=float))

    def compare(self, sigma):
        """PASS/FAIL verdict of the fitted rate against ``sigma / 2``."""
        check_is_fitted(self, "rate_")
        return compare_certificate(sigma, self.estimate_)


class PoincareConstantEstimator(BaseEstimator):
    """Grid estimate of the local Poincare constant; ``fit(model)`` sets ``rho_``."""

    def __init__(self, gamma=1.0, T=1.0, R2=None, velocity_cap=None, n=32, refinements=3):
        self.gamma = gamma
        self.T = T
        self.R2 = R2
        self.velocity_cap = velocity_cap
        self.n = n
        self.refinements = refinements

    def fit(self, model, y=None):
        mp = ModelParams(self.gamma, self.T, N=model.N, k=model.k)
        R2 = self.R2
        if R2 is None:
            from .certificate import compute_R1_R2
            R2 = compute_R1_R2(growth_constants_for(model, mp.T), mp)[1]
        self.rho_, self.diagnostics_ = local_poincare_estimate(
            model, mp, R2, self.velocity_cap, n=self.n, refinements=self.refinements)
        return self


class LangevinCertifier(BaseEstimator):
    """General-route certificate; ``fit(model)`` sets ``certificate_`` and ``sigma_``.

    ``rho_K = "estimate"`` runs :class:`PoincareConstantEstimator` first.
    """

    def __init__(self, gamma=1.0, T=1.0, rho_K="estimate"):
        self.gamma = gamma
        self.T = T
        self.rho_K = rho_K

    def fit(self, model, y=None):
        mp = ModelParams(self.gamma, self.T, N=model.N, k=model.k)
        gc = growth_constants_for(model, mp.T)
        if self.rho_K == "estimate":
            est = PoincareConstantEstimator(self.gamma, self.T).fit(model)
            cert = build_certificate(model, gc, mp, est.rho_, "spectral-estimated", est.diagnostics_)
        else:
            cert = build_certificate(model, gc, mp, self.rho_K)
        self.certificate_ = cert
        self.sigma_ = cert.sigma
        return self


class InvariantSampler(BaseEstimator):
    """Draws from ``exp(-H/T)``; ``fit(model)`` stores the model, ``sample(n)`` draws."""

    def __init__(self, T=1.0, seed=0, n_chains=64, burn_in=2000, thin=10):
        self.T = T
        self.seed = seed
        self.n_chains = n_chains
        self.burn_in = burn_in
        self.thin = thin

    def fit(self, model, y=None):
        self.model_ = model
        return self

    def sample(self, n):
        check_is_fitted(self, "model_")
        mp = ModelParams(1.0, self.T, N=self.model_.N, k=self.model_.k)
        cfg = SamplerConfig(self.seed, self.n_chains, self.burn_in, self.thin)
        Z, self.info_ = sample_invariant(self.model_, mp, n, cfg, return_info=True)
        return Z
