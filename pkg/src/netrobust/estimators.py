"""scikit-learn style wrappers around the functional API.

The estimators take a single square matrix (or a size grid with values)
where scikit-learn would take a sample matrix, so they work with
``get_params``/``set_params``/``clone`` but are not meant for pipelines
over tabular data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .balancing import BalanceConfig, build_symmetrizer
from .energy import energy_with_gramian
from .matrix_core import NetworkMatrix, as_network, require_stable, solve_gramian
from .scaling import FitThresholds, fit_values
from .tailrisk import ShockDistribution, tail_risk_report

__all__ = ["GramianEnergy", "SpectralBalancer", "ScalingLawClassifier", "TailRiskEstimator"]


class GramianEnergy(BaseEstimator):
    """Solve the Gramian of a network and expose its energy measures.

    Attributes
    ----------
    gramian_ : ndarray
    report_ : EnergyReport
    """

    def __init__(self, tol: float = 1e-10):
        self.tol = tol

    def fit(self, A, y=None):
        sol, rep = energy_with_gramian(A, self.tol)
        self.gramian_ = np.array(sol.P)
        self.report_ = rep
        self.n_features_in_ = rep.n
        return self

    def score(self, A=None, y=None):
        """Negative H2 norm, so that larger is better."""
        check_is_fitted(self, "report_")
        return -self.report_.h2


class SpectralBalancer(TransformerMixin, BaseEstimator):
    """Learn ``Lambda = U Gamma U^T`` from one network and blend it in.

    ``transform`` returns ``(1 - epsilon) A + epsilon Lambda``.
    """

    def __init__(self, epsilon: float = 0.5, gamma_mode: str = "scaled-identity", gamma_cap=None, seed: int = 0,
                 custom_diagonal=None):
        self.epsilon = epsilon
        self.gamma_mode = gamma_mode
        self.gamma_cap = gamma_cap
        self.seed = seed
        self.custom_diagonal = custom_diagonal

    def fit(self, A, y=None):
        net = as_network(A)
        rho = require_stable(net).rho
        cap = rho if self.gamma_cap is None else self.gamma_cap
        cfg = BalanceConfig(self.epsilon, self.gamma_mode, cap, self.seed,
                            None if self.custom_diagonal is None else tuple(self.custom_diagonal))
        self.gamma_ = cap
        self.symmetrizer_ = build_symmetrizer(solve_gramian(net), cfg)
        self.n_features_in_ = net.n
        return self

    def transform(self, A):
        check_is_fitted(self, "symmetrizer_")
        a = as_network(A).entries
        if a.shape != self.symmetrizer_.shape:
            raise ValueError(f"expected a {self.symmetrizer_.shape} matrix, got {a.shape}")
        return NetworkMatrix.from_array((1.0 - self.epsilon) * a + self.epsilon * self.symmetrizer_).entries


class ScalingLawClassifier(BaseEstimator):
    """Classify growth of ``y`` over sizes ``X`` as constant, polynomial or exponential."""

    def __init__(self, constant_band: float = 0.15, r2_margin: float = 0.02, min_semilog_slope: float = 0.05,
                 min_points: int = 4, min_span: float = 4.0):
        self.constant_band = constant_band
        self.r2_margin = r2_margin
        self.min_semilog_slope = min_semilog_slope
        self.min_points = min_points
        self.min_span = min_span

    def _thresholds(self):
        return FitThresholds(self.constant_band, self.r2_margin, self.min_semilog_slope, self.min_points,
                             self.min_span)

    def fit(self, X, y):
        n = np.asarray(X, dtype=float).ravel()
        self.fit_ = fit_values(n, np.asarray(y, dtype=float).ravel(), self._thresholds())
        self.class_ = self.fit_.cls
        self.slope_ = self.fit_.slope
        return self

    def predict(self, X=None):
        check_is_fitted(self, "fit_")
        return self.class_


class TailRiskEstimator(BaseEstimator):
    """Tail-risk report of one network (verdict left to sequence analysis)."""

    def __init__(self, z: float = 0.5, tau: float = 3.0, family: str = "gaussian", samples: int = 100_000,
                 seed: int = 0):
        self.z = z
        self.tau = tau
        self.family = family
        self.samples = samples
        self.seed = seed

    def fit(self, A, y=None):
        self.report_ = tail_risk_report(A, self.z, self.tau, ShockDistribution(self.family), self.samples,
                                        self.seed)
        self.n_features_in_ = self.report_.n
        return self
