"""Random trigonometric networks.

Shallow nets map ``x -> w . Phi(Omega x)`` with the doublet activation
``Phi(a) = [cos a; sin a] / sqrt(n)``.  The deep net composes two of them
through an ``H``-dimensional hidden layer ``h = W1 Phi(Omega1 x)``.  Feature
matrices are frozen after sampling; only weights are parameters (what
``jacobian`` differentiates and ``gradient_descent_train`` updates).

Randomness: every sampler takes a ``numpy.random.Generator``.  Monte Carlo
replicas use ``replica_rng(seed, k)``, which seeds PCG64 from
``SeedSequence(seed, spawn_key=(k,))``.  Stream ``k`` is therefore a pure
function of ``(seed, k)`` and replicas can be drawn in any order or in
parallel with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from .errors import InputError, NumericalError
from .kernels import (
    DGPHyper,
    SEHyper,
    SMComponent,
    SupportSet,
    as_points,
    check_mixture,
    jittered_cholesky,
)

__all__ = [
    "replica_rng",
    "GaussianFeatures",
    "MixtureFeatures",
    "sample_features",
    "trig_feature_map",
    "ConstantPhase",
    "LinearPhase",
    "ShallowTrigNet",
    "CosineNet",
    "DeepTrigNet",
    "shallow_forward",
    "cosine_forward",
    "phase_shift_forward",
    "deep_forward",
    "sample_shallow_net",
    "sample_cosine_net",
    "sample_deep_net",
    "sample_support_weights",
    "g_vector",
    "g_matrix_spectrum",
    "jacobian",
]


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replica (or batch) ``index`` of master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# feature distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianFeatures:
    """Rows ``omega ~ N(0, diag(variances))``; one variance broadcasts to all dims."""

    variances: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if v.ndim != 1 or np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise InputError("feature variances must be finite and positive")
        object.__setattr__(self, "variances", tuple(float(a) for a in v))

    @classmethod
    def from_hyper(cls, hyper: SEHyper) -> "GaussianFeatures":
        return cls(tuple(1.0 / np.asarray(hyper.lengthscales) ** 2))

    def std(self, dim: int) -> np.ndarray:
        v = self.variances
        if len(v) == 1:
            return np.full(dim, np.sqrt(v[0]))
        if len(v) != dim:
            raise InputError(f"sampler has {len(v)} variances but dim={dim}")
        return np.sqrt(np.asarray(v))

    def sample(self, rng: np.random.Generator, n: int, dim: int, dtype=np.float64) -> np.ndarray:
        std = self.std(dim).astype(dtype)
        return rng.standard_normal((n, dim), dtype=dtype) * std


@dataclass(frozen=True)
class MixtureFeatures:
    """Rows drawn from ``sum_a weight_a N(mean_a, diag(scale_a))``."""

    components: tuple[SMComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", check_mixture(self.components))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def sample(self, rng: np.random.Generator, n: int, dim: int | None = None, dtype=np.float64,
               return_labels: bool = False):
        if dim is not None and dim != self.dim:
            raise InputError(f"mixture components have dimension {self.dim}, requested {dim}")
        weights = np.array([c.weight for c in self.components])
        labels = rng.choice(len(weights), size=n, p=weights)
        means = np.array([c.mean for c in self.components], dtype=dtype)
        stds = np.sqrt(np.array([c.scale for c in self.components])).astype(dtype)
        omega = rng.standard_normal((n, self.dim), dtype=dtype) * stds[labels] + means[labels]
        return (omega, labels) if return_labels else omega


FeatureSampler = Union[GaussianFeatures, MixtureFeatures]


def sample_features(sampler: FeatureSampler, n: int, dim: int, seed=0) -> np.ndarray:
    """``n`` i.i.d. feature rows of dimension ``dim``; deterministic given ``seed``."""
    if n < 1:
        raise InputError("n must be at least 1")
    return sampler.sample(as_rng(seed), n, dim)


def trig_feature_map(Omega, x) -> np.ndarray:
    """``[cos(Omega x); sin(Omega x)] / sqrt(n)``.

    A vector ``x`` gives a length-``2n`` vector; an ``(N, D)`` matrix gives
    ``(N, 2n)``.  Every row has unit norm.
    """
    Omega = np.asarray(Omega, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = as_points(x, Omega.shape[1])
    A = X @ Omega.T
    Phi = np.concatenate([np.cos(A), np.sin(A)], axis=1) / np.sqrt(Omega.shape[0])
    return Phi[0] if single else Phi


# ---------------------------------------------------------------------------
# phase-shift functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantPhase:
    value: float = 0.0

    def __call__(self, X) -> np.ndarray:
        return np.full(as_points(X).shape[0], float(self.value))


@dataclass(frozen=True)
class LinearPhase:
    """``psi(x) = coef . x``."""

    coef: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coef", tuple(float(c) for c in np.atleast_1d(self.coef)))

    def __call__(self, X) -> np.ndarray:
        return as_points(X, len(self.coef)) @ np.asarray(self.coef)


PhaseShift = Union[ConstantPhase, LinearPhase]


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def _maybe_scalar(values: np.ndarray, x):
    return float(values[0]) if np.ndim(x) <= 1 else values


@dataclass(frozen=True, eq=False)
class ShallowTrigNet:
    """``f(x) = w . Phi(Omega x)`` with ``w = [w_cos; w_sin]``."""

    features: np.ndarray
    weights: np.ndarray
    weight_var: float = 1.0

    def __post_init__(self):
        Omega = _frozen(self.features, 2, "features")
        w = _frozen(self.weights, 1, "weights")
        if w.size != 2 * Omega.shape[0]:
            raise InputError(f"expected {2 * Omega.shape[0]} weights, got {w.size}")
        object.__setattr__(self, "features", Omega)
        object.__setattr__(self, "weights", w)

    @property
    def width(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def last_layer(self, X) -> np.ndarray:
        return trig_feature_map(self.features, as_points(X, self.dim))

    def __call__(self, x):
        return _maybe_scalar(self.last_layer(x) @ self.weights, x)

    def parameters(self) -> np.ndarray:
        return self.weights.copy()

    def with_parameters(self, theta) -> "ShallowTrigNet":
        return ShallowTrigNet(self.features, theta, self.weight_var)


@dataclass(frozen=True, eq=False)
class CosineNet:
    """``f(x) = sqrt(2/n) sum_i w_i cos(omega_i . (x - z_i) + b_i)``."""

    features: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    shifts: np.ndarray
    weight_var: float = 1.0

    def __post_init__(self):
        Omega = _frozen(self.features, 2, "features")
        n = Omega.shape[0]
        w = _frozen(self.weights, 1, "weights")
        b = _frozen(self.biases, 1, "biases")
        z = _frozen(self.shifts, 2, "shifts")
        if w.size != n or b.size != n or z.shape != Omega.shape:
            raise InputError("weights, biases and shifts must match the feature count")
        if np.any(b < 0) or np.any(b > np.pi):
            raise InputError("biases must lie in [0, pi]")
        for name, arr in [("features", Omega), ("weights", w), ("biases", b), ("shifts", z)]:
            object.__setattr__(self, name, arr)

    @property
    def width(self) -> int:
        return self.features.shape[0]

    def last_layer(self, X) -> np.ndarray:
        X = as_points(X, self.features.shape[1])
        phase = X @ self.features.T - (self.features * self.shifts).sum(1) + self.biases
        return np.sqrt(2.0 / self.width) * np.cos(phase)

    def __call__(self, x):
        return _maybe_scalar(self.last_layer(x) @ self.weights, x)


@dataclass(frozen=True, eq=False)
class DeepTrigNet:
    """``f(x) = w2 . Phi(Omega2 h)``, ``h = W1 Phi(Omega1 x)``.

    Shapes: Omega1 (n1, D), W1 (H, 2 n1), Omega2 (n2, H), w2 (2 n2,).
    """

    inner_features: np.ndarray
    inner_weights: np.ndarray
    outer_features: np.ndarray
    outer_weights: np.ndarray
    weight_var: float = 1.0

    def __post_init__(self):
        O1 = _frozen(self.inner_features, 2, "inner_features")
        W1 = _frozen(self.inner_weights, 2, "inner_weights")
        O2 = _frozen(self.outer_features, 2, "outer_features")
        w2 = _frozen(self.outer_weights, 1, "outer_weights")
        if W1.shape[1] != 2 * O1.shape[0]:
            raise InputError("inner_weights must have 2 * n1 columns")
        if O2.shape[1] != W1.shape[0]:
            raise InputError("outer_features must have H columns")
        if w2.size != 2 * O2.shape[0]:
            raise InputError("outer_weights must have 2 * n2 entries")
        for name, arr in [("inner_features", O1), ("inner_weights", W1),
                          ("outer_features", O2), ("outer_weights", w2)]:
            object.__setattr__(self, name, arr)

    @property
    def widths(self) -> tuple[int, int]:
        return self.inner_features.shape[0], self.outer_features.shape[0]

    @property
    def bottleneck(self) -> int:
        return self.inner_weights.shape[0]

    @property
    def dim(self) -> int:
        return self.inner_features.shape[1]

    def hidden(self, X) -> np.ndarray:
        """Hidden-layer values ``h``, shape (N, H)."""
        return trig_feature_map(self.inner_features, as_points(X, self.dim)) @ self.inner_weights.T

    def last_layer(self, X) -> np.ndarray:
        return trig_feature_map(self.outer_features, self.hidden(X))

    def __call__(self, x):
        return _maybe_scalar(self.last_layer(x) @ self.outer_weights, x)

    def parameters(self) -> np.ndarray:
        return np.concatenate([self.inner_weights.ravel(), self.outer_weights])

    def with_parameters(self, theta) -> "DeepTrigNet":
        theta = np.asarray(theta, dtype=float)
        k = self.inner_weights.size
        return DeepTrigNet(self.inner_features, theta[:k].reshape(self.inner_weights.shape),
                           self.outer_features, theta[k:], self.weight_var)


def shallow_forward(net: ShallowTrigNet, x):
    return net(x)


def cosine_forward(net: CosineNet, x):
    return net(x)


def phase_shift_forward(net: ShallowTrigNet, psi: PhaseShift, x):
    """``n**-0.5 sum_i wc_i cos(omega_i.x + psi(x)) + ws_i sin(omega_i.x - psi(x))``."""
    X = as_points(x, net.dim)
    A = X @ net.features.T
    shift = psi(X)[:, None]
    n = net.width
    Phi = np.concatenate([np.cos(A + shift), np.sin(A - shift)], axis=1) / np.sqrt(n)
    return _maybe_scalar(Phi @ net.weights, x)


def deep_forward(net: DeepTrigNet, x, return_hidden: bool = False):
    out = net(x)
    if return_hidden:
        h = net.hidden(x)
        return out, (h[0] if np.ndim(x) <= 1 else h)
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_shallow_net(n: int, dim: int, rng, features: FeatureSampler = GaussianFeatures(),
                       weight_var: float = 1.0) -> ShallowTrigNet:
    rng = as_rng(rng)
    Omega = features.sample(rng, n, dim)
    w = rng.standard_normal(2 * n) * np.sqrt(weight_var)
    return ShallowTrigNet(Omega, w, weight_var)


def sample_cosine_net(n: int, dim: int, rng, features: FeatureSampler = GaussianFeatures(),
                      weight_var: float = 1.0, shift_scale: float = 1.0) -> CosineNet:
    """Biases ``~ Unif[0, pi]``; shifts ``~ N(0, shift_scale**2 I)``."""
    rng = as_rng(rng)
    Omega = features.sample(rng, n, dim)
    w = rng.standard_normal(n) * np.sqrt(weight_var)
    b = rng.uniform(0.0, np.pi, n)
    z = rng.standard_normal((n, dim)) * shift_scale
    return CosineNet(Omega, w, b, z, weight_var)


def sample_support_weights(Omega1, support: SupportSet, prior_var: float = 1.0,
                           noise_var: float | None = None, seed=0) -> np.ndarray:
    """Rows of ``W1`` drawn from the weight posterior given the support.

    Row ``i`` is ``N(wbar_i, A^-1)`` with ``A = Phi_Z Phi_Z' / noise + I / prior``
    and ``wbar_i = A^-1 Phi_Z U_i / noise``.  Drawn without forming ``A``:
    ``w = w0 + prior Phi_Z (prior Phi_Z'Phi_Z + noise I)^-1 (U_i - Phi_Z'w0 - eps)``
    with ``w0 ~ N(0, prior I)`` and ``eps ~ N(0, noise I)``, an exact draw.
    """
    rng = as_rng(seed)
    Omega1 = np.asarray(Omega1, dtype=float)
    noise_var = support.noise_var if noise_var is None else float(noise_var)
    if prior_var < 0 or noise_var < 0:
        raise InputError("prior_var and noise_var must be nonnegative")
    H, M = support.bottleneck, support.size
    n2 = 2 * Omega1.shape[0]
    w0 = rng.standard_normal((H, n2)) * np.sqrt(prior_var)
    if M == 0 or prior_var == 0:
        return w0
    if support.dim != Omega1.shape[1]:
        raise InputError("support inputs and features have different dimensions")
    PhiZ = trig_feature_map(Omega1, support.inputs).T  # (2n, M)
    eps = rng.standard_normal((H, M)) * np.sqrt(noise_var)
    G = prior_var * PhiZ.T @ PhiZ + noise_var * np.eye(M)
    try:
        L, _ = jittered_cholesky(G)
    except NumericalError as err:
        raise NumericalError(f"support posterior is singular: {err}") from err
    resid = support.outputs - w0 @ PhiZ - eps  # (H, M)
    coef = linalg.cho_solve((L, True), resid.T)  # (M, H)
    return w0 + prior_var * (PhiZ @ coef).T


def sample_deep_net(n1: int, n2: int, dim: int, rng, hyper: DGPHyper = DGPHyper(),
                    outer_features: FeatureSampler | None = None,
                    support: SupportSet | None = None) -> DeepTrigNet:
    """Draw a deep net whose wide limit is the deep GP with ``hyper``.

    Draw order: Omega1, W1, Omega2, w2.  With ``support`` the rows of W1
    come from the weight posterior (prior variance ``hyper.inner.amplitude_sq``,
    noise ``support.noise_var``) and the bottleneck is ``support.bottleneck``.
    """
    rng = as_rng(rng)
    H = support.bottleneck if support is not None else hyper.bottleneck
    Omega1 = GaussianFeatures.from_hyper(hyper.inner).sample(rng, n1, dim)
    if support is None:
        W1 = rng.standard_normal((H, 2 * n1)) * np.sqrt(hyper.inner.amplitude_sq)
    else:
        W1 = sample_support_weights(Omega1, support, hyper.inner.amplitude_sq, support.noise_var, rng)
    if outer_features is None:
        outer_features = GaussianFeatures(tuple(1.0 / np.asarray(hyper.outer.lengthscales) ** 2))
    Omega2 = outer_features.sample(rng, n2, H)
    w2 = rng.standard_normal(2 * n2) * np.sqrt(hyper.outer.amplitude_sq)
    return DeepTrigNet(Omega1, W1, Omega2, w2, hyper.outer.amplitude_sq)


# ---------------------------------------------------------------------------
# G matrix and gradients
# ---------------------------------------------------------------------------


def g_vector(Omega1, x, y) -> np.ndarray:
    """``v = Phi(Omega1 x) - Phi(Omega1 y)``; ``G = v v'`` is never formed."""
    return trig_feature_map(Omega1, np.atleast_1d(x)) - trig_feature_map(Omega1, np.atleast_1d(y))


def g_matrix_spectrum(Omega1, x, y) -> tuple[int, float]:
    """Rank and only nonzero eigenvalue (``|v|**2``) of ``G = v v'``."""
    v = g_vector(Omega1, x, y)
    rank = int(np.any(v != 0.0))
    return rank, float(v @ v)


def jacobian(net: ShallowTrigNet | DeepTrigNet, x) -> np.ndarray:
    """Gradient of the output with respect to all weights, features held fixed.

    Ordering matches ``net.parameters()``: for the deep net ``W1`` row-major,
    then ``w2``.  A vector ``x`` gives a flat vector; ``(N, D)`` gives ``(N, P)``.
    """
    single = np.ndim(x) <= 1
    if isinstance(net, ShallowTrigNet):
        J = net.last_layer(x)
    elif isinstance(net, DeepTrigNet):
        X = as_points(x, net.dim)
        P1 = trig_feature_map(net.inner_features, X)  # (N, 2n1)
        h = P1 @ net.inner_weights.T  # (N, H)
        A = h @ net.outer_features.T  # (N, n2)
        n2 = net.outer_features.shape[0]
        cos_a, sin_a = np.cos(A), np.sin(A)
        P2 = np.concatenate([cos_a, sin_a], axis=1) / np.sqrt(n2)
        wc, ws = net.outer_weights[:n2], net.outer_weights[n2:]
        # df/dh_k = n2^-1/2 sum_j Omega2_jk (-wc_j sin a_j + ws_j cos a_j)
        dfdh = ((-wc * sin_a + ws * cos_a) @ net.outer_features) / np.sqrt(n2)  # (N, H)
        JW1 = dfdh[:, :, None] * P1[:, None, :]
        J = np.concatenate([JW1.reshape(X.shape[0], -1), P2], axis=1)
    else:
        raise InputError(f"no Jacobian for {type(net).__name__}")
    return J[0] if single else J
