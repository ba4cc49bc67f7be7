"""Bayesian linear regression on trigonometric features.

With fixed features ``Omega`` and prior ``w ~ N(0, prior_var I)`` the
posterior given noisy targets ``u`` at inputs ``Z`` is Gaussian with

    A    = Phi Phi' / noise_var + I / prior_var
    wbar = A^-1 Phi u / noise_var,        Phi = Phi(Omega Z)  (2n x M)

Predictions can be made from the weights (primal, 2n x 2n) or from the
feature kernel ``K = prior_var Phi'Phi`` (dual, M x M); both are provided
and agree to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InputError, NumericalError
from .kernels import as_points, jittered_cholesky
from .networks import trig_feature_map

__all__ = ["WeightPosterior", "weight_posterior", "predict_weight_space", "predict_kernel_space"]


def _check_vars(prior_var, noise_var):
    if not (prior_var > 0 and noise_var > 0):
        raise InputError("prior_var and noise_var must be positive")


def _design(Omega, Z, u):
    Omega = np.asarray(Omega, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size == 0:
        return Omega, np.zeros((2 * Omega.shape[0], 0)), u
    Z = as_points(Z, Omega.shape[1])
    if Z.shape[0] != u.size:
        raise InputError(f"{Z.shape[0]} inputs but {u.size} targets")
    return Omega, trig_feature_map(Omega, Z).T, u


@dataclass(frozen=True, eq=False)
class WeightPosterior:
    mean: np.ndarray
    precision: np.ndarray
    prior_var: float
    noise_var: float

    def __post_init__(self):
        L, jitter = jittered_cholesky(self.precision)
        if jitter:
            raise NumericalError("posterior precision is not positive definite")
        object.__setattr__(self, "_chol", L)

    def solve(self, B) -> np.ndarray:
        """``A^-1 B`` through the cached Cholesky factor."""
        return linalg.cho_solve((self._chol, True), B)

    def covariance(self) -> np.ndarray:
        return self.solve(np.eye(self.precision.shape[0]))


def weight_posterior(Omega, Z, u, prior_var: float = 1.0, noise_var: float = 1.0) -> WeightPosterior:
    _check_vars(prior_var, noise_var)
    Omega, Phi, u = _design(Omega, Z, u)
    n2, M = Phi.shape
    A = Phi @ Phi.T / noise_var + np.eye(n2) / prior_var
    A = 0.5 * (A + A.T)
    if M == 0:
        mean = np.zeros(n2)
    elif n2 > M:
        # push-through identity: A^-1 Phi / s2 = p Phi (p Phi'Phi + s2 I)^-1
        G = prior_var * Phi.T @ Phi + noise_var * np.eye(M)
        mean = prior_var * Phi @ linalg.cho_solve(linalg.cho_factor(G, lower=True), u)
    else:
        mean = linalg.cho_solve(linalg.cho_factor(A, lower=True), Phi @ u) / noise_var
    return WeightPosterior(mean, A, float(prior_var), float(noise_var))


def predict_weight_space(post: WeightPosterior, Omega, x_star):
    """Predictive mean ``wbar . Phi*`` and variance ``noise + Phi*' A^-1 Phi*``."""
    single = np.ndim(x_star) <= 1
    Phis = trig_feature_map(Omega, as_points(x_star, np.shape(Omega)[1]))  # (N*, 2n)
    mean = Phis @ post.mean
    V = linalg.solve_triangular(post._chol, Phis.T, lower=True)
    var = post.noise_var + (V * V).sum(0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def predict_kernel_space(Omega, Z, u, x_star, prior_var: float = 1.0, noise_var: float = 1.0):
    """Same prediction through the M x M feature-kernel system.

    ``mean = K* (noise I + K)^-1 u`` and
    ``var = noise + K** - K* (noise I + K)^-1 K*'`` with ``K = prior Phi'Phi``.
    """
    _check_vars(prior_var, noise_var)
    Omega, Phi, u = _design(Omega, Z, u)
    if u.size == 0:
        raise InputError("kernel-space prediction needs at least one observation")
    single = np.ndim(x_star) <= 1
    Phis = trig_feature_map(Omega, as_points(x_star, Omega.shape[1]))
    K = prior_var * Phi.T @ Phi
    Ks = prior_var * Phis @ Phi
    Kss = prior_var * (Phis * Phis).sum(1)
    try:
        L = linalg.cholesky(K + noise_var * np.eye(K.shape[0]), lower=True)
    except linalg.LinAlgError as err:
        raise NumericalError("noise_var * I + K is not positive definite") from err
    mean = Ks @ linalg.cho_solve((L, True), u)
    V = linalg.solve_triangular(L, Ks.T, lower=True)
    var = noise_var + Kss - (V * V).sum(0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
