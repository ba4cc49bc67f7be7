"""Exact GP regression over any kernel in :mod:`trigkernel.kernels`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InputError, NumericalError
from .kernels import GPPosterior, Kernel, as_points, gp_condition
from .networks import as_rng

__all__ = ["RegressionProblem", "FitResult", "log_marginal_likelihood", "predict", "optimize_hyperparams"]

LOG_BOUNDS = (1e-3, 1e3)


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    X: np.ndarray
    y: np.ndarray
    kernel: Kernel
    noise_var: float = 1e-2

    def __post_init__(self):
        X = as_points(self.X)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] < 1 or X.shape[0] != y.size:
            raise InputError(f"need N >= 1 matching inputs and targets, got {X.shape[0]} and {y.size}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("inputs and targets must be finite")
        if self.noise_var < 0:
            raise InputError("noise_var must be nonnegative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def replace(self, kernel: Kernel, noise_var: float) -> "RegressionProblem":
        return RegressionProblem(self.X, self.y, kernel, noise_var)

    def posterior(self) -> GPPosterior:
        return gp_condition(self.X, self.y, self.kernel, self.noise_var)


def log_marginal_likelihood(p: RegressionProblem) -> float:
    """``-y'(K + s2 I)^-1 y / 2 - log|K + s2 I| / 2 - N log(2 pi) / 2``."""
    post = p.posterior()
    return float(
        -0.5 * p.y @ post.alpha - np.log(np.diag(post.chol)).sum() - 0.5 * p.y.size * np.log(2 * np.pi)
    )


def predict(p: RegressionProblem, X_star) -> tuple[np.ndarray, np.ndarray]:
    return p.posterior().predict(X_star)


@dataclass(frozen=True, eq=False)
class FitResult:
    kernel: Kernel
    noise_var: float
    log_marginal_likelihood: float
    initial_log_marginal_likelihood: float
    converged: bool
    evaluations: int


def optimize_hyperparams(
    p: RegressionProblem,
    bounds: tuple[float, float] = LOG_BOUNDS,
    budget: int = 2000,
    restarts: int = 5,
    seed: int = 0,
    optimize_noise: bool = True,
) -> FitResult:
    """Maximise the log marginal likelihood by Nelder-Mead in log space.

    The first start is the current configuration; the others perturb it by
    a standard normal in log space, clipped to ``bounds``.  ``budget`` caps
    function evaluations per start; when any start runs out the result is
    flagged ``converged=False`` but the best point seen is still returned.
    The returned objective is never below the initial one.
    """
    lo, hi = bounds
    if not (0 < lo < hi and np.isfinite(hi)):
        raise InputError("bounds must satisfy 0 < lo < hi < inf")
    theta0 = p.kernel.hyperparameters()
    if optimize_noise:
        theta0 = np.append(theta0, max(p.noise_var, lo))
    if theta0.size == 0:
        lml = log_marginal_likelihood(p)
        return FitResult(p.kernel, p.noise_var, lml, lml, True, 1)
    log_lo, log_hi = np.log(lo), np.log(hi)
    z0 = np.clip(np.log(theta0), log_lo, log_hi)

    def unpack(z):
        v = np.exp(z)
        if optimize_noise:
            return p.kernel.with_hyperparameters(v[:-1]), v[-1]
        return p.kernel.with_hyperparameters(v), p.noise_var

    def objective(z):
        kernel, noise = unpack(np.clip(z, log_lo, log_hi))
        try:
            return -log_marginal_likelihood(p.replace(kernel, noise))
        except (NumericalError, InputError, FloatingPointError):
            return np.inf

    initial = log_marginal_likelihood(p)
    best_z, best_val = None, -initial
    rng = as_rng(seed)
    converged, evaluations = True, 0
    starts = [z0] + [np.clip(z0 + rng.standard_normal(z0.size), log_lo, log_hi) for _ in range(restarts - 1)]
    for start in starts:
        res = optimize.minimize(
            objective, start, method="Nelder-Mead",
            bounds=[(log_lo, log_hi)] * z0.size,
            options={"maxfev": budget, "xatol": 1e-6, "fatol": 1e-9},
        )
        evaluations += res.nfev
        converged &= bool(res.success)
        if np.isfinite(res.fun) and res.fun < best_val:
            best_z, best_val = res.x, res.fun
    if best_z is None:
        return FitResult(p.kernel, p.noise_var, initial, initial, converged, evaluations)
    kernel, noise = unpack(np.clip(best_z, log_lo, log_hi))
    return FitResult(kernel, float(noise), -float(best_val), initial, converged, evaluations)

