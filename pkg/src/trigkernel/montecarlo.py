"""Monte Carlo estimators linking sampled networks to closed-form kernels.

Two families of estimators are provided.

*Network estimators* (``empirical_covariance``, ``empirical_ntk``) draw whole
networks from a factory ``rng -> net`` and evaluate them.  Replica ``k`` uses
``replica_rng(seed, k)``.

*Collapsed samplers* (``shallow_pair_products``, ``deep_pair_products``,
``two_stage_pair_products``, ``deep_outputs``) draw the same network outputs
in distribution but integrate Gaussian weight layers out exactly: given the
features, the outputs of ``w . Phi`` with ``w ~ N(0, s I)`` are jointly
``N(0, s Phi'Phi)``, and a Gaussian hidden layer ``h = W1 Phi`` is drawn
directly from its Gram matrix.  Only the feature matrices are sampled
explicitly, in float32 with float64 accumulation.  These samplers process
replicas in fixed-size batches; batch ``b`` uses ``replica_rng(seed, b)``, so
results depend on ``batch`` as well as ``seed``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import InputError
from .kernels import DGPHyper, GPPosterior, NTKKernel, as_points, jittered_cholesky
from .networks import (
    DeepTrigNet,
    GaussianFeatures,
    MixtureFeatures,
    ShallowTrigNet,
    jacobian,
    replica_rng,
)

__all__ = [
    "MCEstimate",
    "WIDTH_ALLOWANCE_C",
    "width_allowance",
    "empirical_covariance",
    "empirical_covariances",
    "empirical_ntk",
    "empirical_ntks",
    "shallow_pair_products",
    "deep_pair_products",
    "two_stage_pair_products",
    "deep_outputs",
    "shallow_outputs",
    "estimates",
    "TrainTrace",
    "gradient_descent_train",
    "empirical_ntk_gram",
    "ntk_regression_mean",
]

# Finite-width slack c / sqrt(width) added on top of the Monte Carlo error.
WIDTH_ALLOWANCE_C = 0.3
DIVERGENCE_LOSS = 1e12
DEFAULT_BATCH = 64


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.samples < 2:
            raise InputError("an estimate needs at least two samples")
        if not self.std_error >= 0:
            raise InputError("std_error must be nonnegative")

    @classmethod
    def from_samples(cls, values, seed: int) -> "MCEstimate":
        values = np.asarray(values, dtype=float).reshape(-1)
        n = values.size
        if n < 2:
            raise InputError("an estimate needs at least two samples")
        return cls(float(values.mean()), float(values.std(ddof=1) / np.sqrt(n)), n, int(seed))

    def error(self, target: float) -> float:
        return abs(self.value - target)

    def within(self, target: float, n_se: float = 4.0, allowance: float = 0.0) -> bool:
        return self.error(target) <= n_se * self.std_error + allowance


def width_allowance(width: int, c: float = WIDTH_ALLOWANCE_C) -> float:
    return c / np.sqrt(width)


def estimates(samples: np.ndarray, seed: int) -> list[MCEstimate]:
    """One estimate per column of an ``(S, P)`` sample array."""
    samples = np.asarray(samples)
    return [MCEstimate.from_samples(samples[:, j], seed) for j in range(samples.shape[1])]


def _pairs(X, Y):
    X = as_points(X)
    Y = as_points(Y, X.shape[1])
    if X.shape != Y.shape:
        raise InputError("pair arrays must have the same shape")
    return X, Y


# ---------------------------------------------------------------------------
# network estimators
# ---------------------------------------------------------------------------

NetFactory = Callable[[np.random.Generator], object]


def empirical_covariances(net_factory: NetFactory, X, Y, samples: int, seed: int = 0,
                          conditional: bool = False) -> list[MCEstimate]:
    """Estimates of ``E[f(x_p) f(y_p)]`` for every pair, sharing network draws.

    With ``conditional`` the outer weights are averaged analytically, i.e. each
    replica contributes ``weight_var * Phi_last(x) . Phi_last(y)``.
    """
    if samples < 100:
        raise InputError("use at least 100 samples")
    X, Y = _pairs(X, Y)
    P = X.shape[0]
    both = np.vstack([X, Y])
    out = np.empty((samples, P))
    for k in range(samples):
        net = net_factory(replica_rng(seed, k))
        if conditional:
            L = net.last_layer(both)
            out[k] = net.weight_var * (L[:P] * L[P:]).sum(1)
        else:
            f = net(both)
            out[k] = f[:P] * f[P:]
    return estimates(out, seed)


def empirical_covariance(net_factory: NetFactory, x, y, samples: int, seed: int = 0,
                         conditional: bool = False) -> MCEstimate:
    return empirical_covariances(net_factory, np.atleast_1d(x), np.atleast_1d(y), samples, seed, conditional)[0]


def empirical_ntks(net_factory: NetFactory, X, Y, samples: int, seed: int = 0) -> list[MCEstimate]:
    """Estimates of ``E[grad f(x_p) . grad f(y_p)]`` over weight gradients."""
    if samples < 2:
        raise InputError("use at least 2 samples")
    X, Y = _pairs(X, Y)
    P = X.shape[0]
    both = np.vstack([X, Y])
    out = np.empty((samples, P))
    for k in range(samples):
        J = jacobian(net_factory(replica_rng(seed, k)), both)
        out[k] = (J[:P] * J[P:]).sum(1)
    return estimates(out, seed)


def empirical_ntk(net_factory: NetFactory, x, y, samples: int, seed: int = 0) -> MCEstimate:
    return empirical_ntks(net_factory, np.atleast_1d(x), np.atleast_1d(y), samples, seed)[0]


# ---------------------------------------------------------------------------
# collapsed samplers
# ---------------------------------------------------------------------------


def _batches(samples: int, batch: int):
    for b, start in enumerate(range(0, samples, batch)):
        yield b, slice(start, min(start + batch, samples))


def _mean_cos(proj: np.ndarray) -> np.ndarray:
    """Mean of cos over axis 1, float64 accumulation."""
    return np.cos(proj).mean(axis=1, dtype=np.float64)


def _correlated_products(rng, rho: np.ndarray, amplitude_sq: float) -> np.ndarray:
    """``f(x) f(y)`` for unit-variance outputs with correlation ``rho``."""
    rho = np.clip(rho, -1.0, 1.0)
    z1 = rng.standard_normal(rho.shape)
    z2 = rng.standard_normal(rho.shape)
    return amplitude_sq * z1 * (rho * z1 + np.sqrt(1.0 - rho**2) * z2)


def shallow_pair_products(X, Y, n: int, samples: int, seed: int = 0,
                          features: GaussianFeatures | MixtureFeatures = GaussianFeatures(),
                          weight_var: float = 1.0, batch: int = DEFAULT_BATCH,
                          conditional: bool = False) -> np.ndarray:
    """``(S, P)`` draws of ``f(x_p) f(y_p)`` for the shallow trig net of width ``n``.

    Given the features, ``(f(x), f(y))`` has unit-norm rows and correlation
    ``mean_i cos(omega_i . (x - y))``.  With ``conditional`` each row holds
    that conditional covariance instead of a product, which removes the
    weight noise and leaves only the finite-width fluctuation.
    """
    X, Y = _pairs(X, Y)
    tau = (X - Y).astype(np.float32)
    D = X.shape[1]
    out = np.empty((samples, X.shape[0]))
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        omega = features.sample(rng, B * n, D, dtype=np.float32).reshape(B, n, D)
        rho = _mean_cos(omega @ tau.T)
        out[sl] = weight_var * rho if conditional else _correlated_products(rng, rho, weight_var)
    return out


def deep_pair_products(X, Y, n1: int, n2: int, samples: int, seed: int = 0,
                       hyper: DGPHyper = DGPHyper(), batch: int = DEFAULT_BATCH,
                       conditional: bool = False) -> np.ndarray:
    """``(S, P)`` draws of ``f(x_p) f(y_p)`` for the deep trig net with i.i.d. weights.

    Per replica: ``s = |Phi1(x) - Phi1(y)|**2`` from the inner features,
    ``h(x) - h(y) ~ N(0, amp1 * s * I_H)``, then the outer correlation
    ``mean_j cos(omega2_j . (h(x) - h(y)))``.  With ``conditional`` both
    weight layers are averaged out, giving
    ``amp2 * mean_j exp(-amp1 * s * |omega2_j|**2 / 2)`` per replica.
    """
    X, Y = _pairs(X, Y)
    D, P, H = X.shape[1], X.shape[0], hyper.bottleneck
    tau = (X - Y).astype(np.float32)
    inner = GaussianFeatures.from_hyper(hyper.inner)
    outer = GaussianFeatures(tuple(1.0 / np.asarray(hyper.outer.lengthscales) ** 2))
    out = np.empty((samples, P))
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        omega1 = inner.sample(rng, B * n1, D, dtype=np.float32).reshape(B, n1, D)
        s = 2.0 - 2.0 * _mean_cos(omega1 @ tau.T)  # (B, P)
        d = np.sqrt(hyper.inner.amplitude_sq * np.maximum(s, 0.0))[:, :, None] * rng.standard_normal((B, P, H))
        omega2 = outer.sample(rng, B * n2, H, dtype=np.float32).reshape(B, n2, H)
        amp = hyper.outer.amplitude_sq
        if conditional:
            sq = (omega2.astype(np.float64) ** 2).sum(-1)  # (B, n2)
            out[sl] = amp * np.exp(-0.5 * hyper.inner.amplitude_sq * sq[:, :, None] * s[:, None, :]).mean(1)
        else:
            rho = _mean_cos(omega2 @ d.astype(np.float32).transpose(0, 2, 1))
            out[sl] = _correlated_products(rng, rho, amp)
    return out


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    """Factor ``L`` with ``L L' = C`` for a PSD (possibly singular) matrix; batched."""
    w, V = np.linalg.eigh(C)
    return V * np.sqrt(np.maximum(w, 0.0))[..., None, :]


def two_stage_pair_products(X, Y, inner: GPPosterior, n2: int, samples: int, seed: int = 0,
                            outer_features: GaussianFeatures | MixtureFeatures = GaussianFeatures(),
                            amplitude_sq: float = 1.0, batch: int = DEFAULT_BATCH) -> np.ndarray:
    """``(S, P)`` draws of ``f(x_p) f(y_p)`` for an outer trig net of width ``n2``
    applied to a hidden layer drawn from the conditional GP ``inner``.

    ``inner`` may carry ``H`` output columns (shared covariance); the outer
    features must then have dimension ``H``.
    """
    X, Y = _pairs(X, Y)
    P = X.shape[0]
    both = np.vstack([X, Y])
    mean = np.asarray(inner.mean(both), dtype=float)
    if mean.ndim == 1:
        mean = mean[:, None]
    H = mean.shape[1]
    root = _psd_sqrt(inner.covariance(both))
    out = np.empty((samples, P))
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        h = mean[None] + np.einsum("ij,bjh->bih", root, rng.standard_normal((B, 2 * P, H)))
        d = (h[:, :P] - h[:, P:]).astype(np.float32)  # (B, P, H)
        omega2 = outer_features.sample(rng, B * n2, H, dtype=np.float32).reshape(B, n2, H)
        rho = _mean_cos(omega2 @ d.transpose(0, 2, 1))
        out[sl] = _correlated_products(rng, rho, amplitude_sq)
    return out


def _feature_gram(omega: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Batched ``Phi(omega X)' Phi(omega X)``: omega (B, n, D), X (B, N, D) or (N, D)."""
    A = omega @ np.swapaxes(X, -1, -2)  # (B, n, N)
    C, S = np.cos(A), np.sin(A)
    G = np.swapaxes(C, 1, 2) @ C + np.swapaxes(S, 1, 2) @ S
    return G.astype(np.float64) / omega.shape[1]


def deep_outputs(X, n1: int, n2: int, samples: int, seed: int = 0, hyper: DGPHyper = DGPHyper(),
                 batch: int = DEFAULT_BATCH) -> np.ndarray:
    """``(S, N)`` joint draws of the deep trig net at the rows of ``X``."""
    X = as_points(X)
    N, D, H = X.shape[0], X.shape[1], hyper.bottleneck
    X32 = X.astype(np.float32)
    inner = GaussianFeatures.from_hyper(hyper.inner)
    outer = GaussianFeatures(tuple(1.0 / np.asarray(hyper.outer.lengthscales) ** 2))
    out = np.empty((samples, N))
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        omega1 = inner.sample(rng, B * n1, D, dtype=np.float32).reshape(B, n1, D)
        G1 = hyper.inner.amplitude_sq * _feature_gram(omega1, X32)
        h = _psd_sqrt(G1) @ rng.standard_normal((B, N, H))  # (B, N, H)
        omega2 = outer.sample(rng, B * n2, H, dtype=np.float32).reshape(B, n2, H)
        G2 = hyper.outer.amplitude_sq * _feature_gram(omega2, h.astype(np.float32))
        out[sl] = (_psd_sqrt(G2) @ rng.standard_normal((B, N, 1)))[..., 0]
    return out


def shallow_outputs(X, n: int, samples: int, seed: int = 0,
                    features: GaussianFeatures | MixtureFeatures = GaussianFeatures(),
                    weight_var: float = 1.0, batch: int = DEFAULT_BATCH) -> np.ndarray:
    """``(S, N)`` outputs of explicitly sampled shallow nets (features and weights)."""
    X = as_points(X)
    D = X.shape[1]
    out = np.empty((samples, X.shape[0]))
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        omega = features.sample(rng, B * n, D).reshape(B, n, D)
        w = rng.standard_normal((B, 2 * n)) * np.sqrt(weight_var)
        A = omega @ X.T  # (B, n, N)
        out[sl] = (np.einsum("bn,bnk->bk", w[:, :n], np.cos(A))
                   + np.einsum("bn,bnk->bk", w[:, n:], np.sin(A))) / np.sqrt(n)
    return out


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Full-batch gradient descent record.

    With ``centered`` the model is ``f(x; theta) - f(x; theta_0)`` so that its
    output is zero at initialisation; its tangent kernel is that of ``f``.
    """

    losses: np.ndarray
    net: ShallowTrigNet | DeepTrigNet
    initial_net: ShallowTrigNet | DeepTrigNet
    lr: float
    steps: int
    centered: bool
    diverged: bool
    converged: bool

    def predict(self, X) -> np.ndarray:
        X = as_points(X, self.net.dim)
        f = self.net(X)
        return f - self.initial_net(X) if self.centered else f


def empirical_ntk_gram(net: ShallowTrigNet | DeepTrigNet, X, X2=None) -> np.ndarray:
    J = jacobian(net, as_points(X))
    J2 = J if X2 is None else jacobian(net, as_points(X2))
    return J @ J2.T


def gradient_descent_train(net: ShallowTrigNet | DeepTrigNet, X, y, lr: float | None = None,
                           steps: int = 5000, tol: float | None = None,
                           center: bool = False) -> TrainTrace:
    """Minimise ``0.5 * sum_i (f(x_i) - y_i)**2`` over the weights.

    ``lr`` defaults to ``1 / (2 * lambda_max)`` of the initial tangent-kernel
    Gram matrix.  Stops after ``steps`` updates, when the loss drops below
    ``tol``, or when it exceeds 1e12 (flagged as diverged).
    """
    X = as_points(X, net.dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != X.shape[0]:
        raise InputError("X and y lengths differ")
    J0 = jacobian(net, X)
    if lr is None:
        lr = 1.0 / (2.0 * np.linalg.eigvalsh(J0 @ J0.T)[-1])
    if lr < 0:
        raise InputError("lr must be nonnegative")
    offset = net(X) if center else 0.0
    theta = net.parameters()
    current = net
    losses = []
    diverged = converged = False
    for _ in range(steps + 1):
        J = jacobian(current, X)
        r = current(X) - offset - y
        loss = 0.5 * float(r @ r)
        losses.append(loss)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            diverged = True
            break
        if tol is not None and loss < tol:
            converged = True
            break
        if len(losses) > steps:
            break
        theta = theta - lr * (J.T @ r)
        current = net.with_parameters(theta)
    return TrainTrace(np.array(losses), current, net, float(lr), len(losses) - 1, center, diverged, converged)


def ntk_regression_mean(X_star, X, y, H: int = 1, jitter: float = 1e-8) -> np.ndarray:
    """Ridgeless kernel regression with the deep-net NTK: ``K* (K + j I)^-1 y``.

    ``j = jitter * trace(K) / N`` stabilises the solve.
    """
    kernel = NTKKernel(H)
    X = as_points(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    K = kernel.gram(X)
    K = 0.5 * (K + K.T) + jitter * np.trace(K) / X.shape[0] * np.eye(X.shape[0])
    L, _ = jittered_cholesky(K)
    return kernel.gram(as_points(X_star, X.shape[1]), X) @ linalg.cho_solve((L, True), y)
