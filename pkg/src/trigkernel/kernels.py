"""Closed-form kernels, Gram matrices and Gaussian-process conditioning.

Six covariance functions are provided, each as a small immutable class
exposing ``gram(X, X2=None)`` plus a scalar ``__call__(x, y)``:

================  =====================================================
``SEKernel``       squared exponential, per-dimension lengthscales
``SMKernel``       spectral mixture with diagonal spectral scales
``DGPKernel``      covariance of a zero-mean 2-layer SE/SE deep GP
``SupportKernel``  2-layer deep GP whose hidden layer passes through
                   fixed support points (Z, U)
``SMSupportKernel`` as above with a spectral-mixture outer layer
``NTKKernel``      tangent kernel of the deep trigonometric network
================  =====================================================

Module-level functions (``se_kernel``, ``dgp_se_kernel``, ...) are thin
scalar conveniences over the classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import InputError, NumericalError

__all__ = [
    "SEHyper",
    "SMComponent",
    "DGPHyper",
    "SupportSet",
    "GPPosterior",
    "Kernel",
    "SEKernel",
    "SMKernel",
    "DGPKernel",
    "SupportKernel",
    "SMSupportKernel",
    "NTKKernel",
    "se_kernel",
    "sm_kernel",
    "dgp_se_kernel",
    "dgp_support_kernel",
    "sm_dgp_kernel",
    "ntk_dgp_kernel",
    "kernel_matrix",
    "gp_condition",
    "jittered_cholesky",
]

# Cholesky jitter schedule, as multiples of the mean diagonal.
JITTER_START = 1e-10
JITTER_MAX = 1e-4
# Largest negative rounding error tolerated before a variance is reported as
# a numerical failure instead of clamped to zero.
NEGATIVE_VARIANCE_TOL = 1e-10


def _positive_tuple(values, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a scalar or a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InputError(f"{name} must be finite and positive, got {arr}")
    return tuple(float(v) for v in arr)


def _readonly(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to an ``(N, D)`` float array; a 1-D array is one point."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise InputError(f"expected points of shape (N, D), got {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"points have dimension {arr.shape[1]}, expected {dim}")
    return arr


def _broadcast_scales(values: tuple[float, ...], dim: int, name: str) -> np.ndarray:
    if len(values) == 1:
        return np.full(dim, values[0])
    if len(values) != dim:
        raise InputError(f"{name} has {len(values)} entries but inputs have dimension {dim}")
    return np.asarray(values)


# ---------------------------------------------------------------------------
# hyperparameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SEHyper:
    """Squared-exponential hyperparameters.

    ``k(x, y) = amplitude_sq * exp(-0.5 * sum_d (x_d - y_d)**2 / l_d**2)``.
    A single lengthscale is shared by every input dimension.
    """

    amplitude_sq: float = 1.0
    lengthscales: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        (amp,) = _positive_tuple(self.amplitude_sq, "amplitude_sq")
        object.__setattr__(self, "amplitude_sq", amp)
        object.__setattr__(self, "lengthscales", _positive_tuple(self.lengthscales, "lengthscales"))

    def lengthscale_vector(self, dim: int) -> np.ndarray:
        return _broadcast_scales(self.lengthscales, dim, "lengthscales")

    def feature_variances(self, dim: int) -> np.ndarray:
        """Diagonal of the spectral covariance, ``1 / l_d**2``."""
        return 1.0 / self.lengthscale_vector(dim) ** 2


@dataclass(frozen=True)
class SMComponent:
    """One Gaussian in a spectral mixture: weight, mean and diagonal covariance."""

    weight: float
    mean: tuple[float, ...]
    scale: tuple[float, ...]

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight <= 0:
            raise InputError(f"component weight must be positive, got {self.weight}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise InputError("component mean must be a finite vector")
        scale = _positive_tuple(self.scale, "scale")
        if len(scale) == 1 and mean.size > 1:
            scale = scale * mean.size
        if len(scale) != mean.size:
            raise InputError("component mean and scale must have the same length")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", tuple(float(v) for v in mean))
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return len(self.mean)


def check_mixture(components: Sequence[SMComponent]) -> tuple[SMComponent, ...]:
    comps = tuple(components)
    if not comps:
        raise InputError("a spectral mixture needs at least one component")
    total = sum(c.weight for c in comps)
    if abs(total - 1.0) > 1e-12:
        raise InputError(f"mixture weights must sum to 1, got {total!r}")
    if len({c.dim for c in comps}) != 1:
        raise InputError("all mixture components must share a dimension")
    return comps


@dataclass(frozen=True)
class DGPHyper:
    """Hyperparameters of the 2-layer deep GP: inner SE, outer SE, bottleneck."""

    inner: SEHyper = field(default_factory=SEHyper)
    outer: SEHyper = field(default_factory=SEHyper)
    bottleneck: int = 1

    def __post_init__(self):
        if int(self.bottleneck) != self.bottleneck or self.bottleneck < 1:
            raise InputError(f"bottleneck must be a positive integer, got {self.bottleneck}")
        object.__setattr__(self, "bottleneck", int(self.bottleneck))
        if len(self.outer.lengthscales) not in (1, self.bottleneck):
            raise InputError("outer lengthscales must be scalar or one per bottleneck unit")


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Points ``inputs`` (M x D) the hidden layer is pinned to, with values
    ``outputs`` (H x M, one row per hidden unit)."""

    inputs: np.ndarray
    outputs: np.ndarray
    noise_var: float = 0.0

    def __post_init__(self):
        Z = _readonly(self.inputs, 2, "inputs")
        U = np.array(self.outputs, dtype=float)
        if U.ndim == 1:
            U = U.reshape(1, -1)
        U = _readonly(U, 2, "outputs")
        if U.shape[1] != Z.shape[0]:
            raise InputError(
                f"outputs have {U.shape[1]} columns but there are {Z.shape[0]} support inputs"
            )
        if self.noise_var < 0 or not np.isfinite(self.noise_var):
            raise InputError("noise_var must be finite and nonnegative")
        object.__setattr__(self, "inputs", Z)
        object.__setattr__(self, "outputs", U)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def bottleneck(self) -> int:
        return self.outputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _pair_inputs(X, X2, dim=None):
    X = as_points(X, dim)
    X2 = X if X2 is None else as_points(X2, X.shape[1])
    return X, X2


def scaled_sq_dist(X: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    A = X / lengthscales
    B = X2 / lengthscales
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    # exact zeros on coincident points keep k(x, x) == amplitude
    d2[d2 < 0] = 0.0
    if X2 is X:
        np.fill_diagonal(d2, 0.0)
    return d2


class Kernel:
    """Common surface of every covariance function."""

    kind: str = ""

    def gram(self, X, X2=None) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, y) -> float:
        return float(self.gram(as_points(x), as_points(y))[0, 0])

    def diag(self, X) -> np.ndarray:
        X = as_points(X)
        return np.array([self.gram(x[None, :])[0, 0] for x in X])

    # log-space optimisation hooks; kernels without free positive
    # hyperparameters return an empty vector
    def hyperparameters(self) -> np.ndarray:
        return np.empty(0)

    def with_hyperparameters(self, values) -> "Kernel":
        if len(values):
            raise InputError(f"{type(self).__name__} has no free hyperparameters")
        return self


class SEKernel(Kernel):
    kind = "se"

    def __init__(self, hyper: SEHyper | None = None):
        self.hyper = hyper or SEHyper()

    def __repr__(self):
        return f"SEKernel({self.hyper!r})"

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2)
        ls = self.hyper.lengthscale_vector(X.shape[1])
        return self.hyper.amplitude_sq * np.exp(-0.5 * scaled_sq_dist(X, X2, ls))

    def diag(self, X):
        return np.full(as_points(X).shape[0], self.hyper.amplitude_sq)

    def hyperparameters(self):
        return np.array([self.hyper.amplitude_sq, *self.hyper.lengthscales])

    def with_hyperparameters(self, values):
        values = np.asarray(values, dtype=float)
        return SEKernel(SEHyper(values[0], tuple(values[1:])))


class SMKernel(Kernel):
    """Spectral mixture ``amp * sum_a w_a cos(mu_a.tau) exp(-tau' L_a tau / 2)``.

    Free hyperparameters for optimisation are the amplitude and the
    spectral scales; weights and means stay fixed.
    """

    kind = "sm"

    def __init__(self, components: Sequence[SMComponent], amplitude_sq: float = 1.0):
        self.components = check_mixture(components)
        (self.amplitude_sq,) = _positive_tuple(amplitude_sq, "amplitude_sq")

    def __repr__(self):
        return f"SMKernel({list(self.components)!r}, amplitude_sq={self.amplitude_sq})"

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2, self.dim)
        tau = X[:, None, :] - X2[None, :, :]
        K = np.zeros(tau.shape[:2])
        for c in self.components:
            K += c.weight * np.cos(tau @ np.asarray(c.mean)) * np.exp(
                -0.5 * (tau**2) @ np.asarray(c.scale)
            )
        return self.amplitude_sq * K

    def diag(self, X):
        return np.full(as_points(X).shape[0], self.amplitude_sq)

    def hyperparameters(self):
        return np.array([self.amplitude_sq, *(s for c in self.components for s in c.scale)])

    def with_hyperparameters(self, values):
        values = np.asarray(values, dtype=float)
        comps, i = [], 1
        for c in self.components:
            comps.append(SMComponent(c.weight, c.mean, tuple(values[i : i + c.dim])))
            i += c.dim
        return SMKernel(comps, values[0])


class DGPKernel(Kernel):
    """Effective covariance of the zero-mean 2-layer SE/SE deep GP.

    ``amp2 * prod_i {1 + 2 amp1 / l2_i**2 * [1 - kse1(x, y)]}**(-1/2)`` with
    ``kse1`` the unit-amplitude inner SE kernel and ``i`` over the bottleneck.
    """

    kind = "dgp"

    def __init__(self, hyper: DGPHyper | None = None):
        self.hyper = hyper or DGPHyper()

    def __repr__(self):
        return f"DGPKernel({self.hyper!r})"

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2)
        h = self.hyper
        k_hat = np.exp(-0.5 * scaled_sq_dist(X, X2, h.inner.lengthscale_vector(X.shape[1])))
        ratios = h.inner.amplitude_sq / h.outer.lengthscale_vector(h.bottleneck) ** 2
        log_k = np.zeros_like(k_hat)
        for r in ratios:
            log_k -= 0.5 * np.log1p(2.0 * r * (1.0 - k_hat))
        return h.outer.amplitude_sq * np.exp(log_k)

    def diag(self, X):
        return np.full(as_points(X).shape[0], self.hyper.outer.amplitude_sq)

    def hyperparameters(self):
        h = self.hyper
        return np.array(
            [h.inner.amplitude_sq, *h.inner.lengthscales, h.outer.amplitude_sq, *h.outer.lengthscales]
        )

    def with_hyperparameters(self, values):
        values = np.asarray(values, dtype=float)
        n_in = len(self.hyper.inner.lengthscales)
        inner = SEHyper(values[0], tuple(values[1 : 1 + n_in]))
        outer = SEHyper(values[1 + n_in], tuple(values[2 + n_in :]))
        return DGPKernel(DGPHyper(inner, outer, self.hyper.bottleneck))


class _ConditionedInner:
    """Inner SE GP conditioned on a support set; shared by both support kernels."""

    def __init__(self, support: SupportSet, inner: SEHyper):
        self.support = support
        self.inner = inner
        self.posterior = gp_condition(
            support.inputs, support.outputs.T, SEKernel(inner), support.noise_var
        )

    def moments(self, X, X2):
        """Means at X and X2 (N x H, N2 x H) and the matrix of delta**2."""
        post = self.posterior
        mX, mX2 = post.mean(X), post.mean(X2)
        cross = post.cross_covariance(X, X2)
        vX = post.variance(X, clamp=False)
        vX2 = post.variance(X2, clamp=False)
        delta2 = vX[:, None] + vX2[None, :] - 2.0 * cross
        scale = max(1.0, self.inner.amplitude_sq)
        if np.any(delta2 < -NEGATIVE_VARIANCE_TOL * scale):
            raise NumericalError(
                f"conditional covariance is not PSD (min delta^2 = {delta2.min():.3e})"
            )
        return np.atleast_2d(mX), np.atleast_2d(mX2), np.maximum(delta2, 0.0)


def _as_support(support, inner: SEHyper) -> SupportSet:
    if not isinstance(support, SupportSet):
        raise InputError("support must be a SupportSet")
    if len(inner.lengthscales) not in (1, support.dim) and support.size:
        raise InputError("inner lengthscales do not match the support input dimension")
    return support


class SupportKernel(Kernel):
    """2-layer deep GP covariance with the hidden layer pinned to ``(Z, U)``.

    Each hidden unit is the inner SE GP conditioned on its row of ``U``; the
    units share one conditional covariance, hence one ``delta**2``.  With the
    outer SE lengthscale ``l`` the covariance is

    ``amp2 * prod_i exp(-dm_i**2 / (2 (l_i**2 + d2))) / sqrt(1 + d2 / l_i**2)``

    where ``dm_i`` is the difference of conditional means of unit ``i``.
    """

    kind = "dgp_support"

    def __init__(self, support: SupportSet, inner: SEHyper | None = None, outer: SEHyper | None = None):
        inner = inner or SEHyper()
        self.support = _as_support(support, inner)
        self.outer = outer or SEHyper()
        if len(self.outer.lengthscales) not in (1, self.support.bottleneck):
            raise InputError("outer lengthscales must be scalar or one per hidden unit")
        self._cond = _ConditionedInner(self.support, inner)

    @property
    def inner(self) -> SEHyper:
        return self._cond.inner

    def __repr__(self):
        return f"SupportKernel(M={self.support.size}, H={self.support.bottleneck}, inner={self.inner!r}, outer={self.outer!r})"

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2)
        mX, mX2, d2 = self._cond.moments(X, X2)
        ell2 = self.outer.lengthscale_vector(self.support.bottleneck) ** 2
        log_k = np.zeros_like(d2)
        for i, l2 in enumerate(ell2):
            dm = mX[:, i][:, None] - mX2[:, i][None, :]
            log_k += -(dm**2) / (2.0 * (l2 + d2)) - 0.5 * np.log1p(d2 / l2)
        return self.outer.amplitude_sq * np.exp(log_k)

    def diag(self, X):
        return np.full(as_points(X).shape[0], self.outer.amplitude_sq)

    def hyperparameters(self):
        return np.array(
            [self.inner.amplitude_sq, *self.inner.lengthscales, self.outer.amplitude_sq, *self.outer.lengthscales]
        )

    def with_hyperparameters(self, values):
        values = np.asarray(values, dtype=float)
        n_in = len(self.inner.lengthscales)
        inner = SEHyper(values[0], tuple(values[1 : 1 + n_in]))
        outer = SEHyper(values[1 + n_in], tuple(values[2 + n_in :]))
        return SupportKernel(self.support, inner, outer)


class SMSupportKernel(Kernel):
    """Deep GP with a pinned scalar hidden layer and a spectral-mixture outer GP.

    For each component ``(pi, mu, s2)`` and ``c = 1 + s2 * d2``:
    ``pi * c**-0.5 * exp(-(s2 dm**2 + d2 mu**2) / (2c)) * cos(mu dm / c)``.
    """

    kind = "sm_dgp"

    def __init__(self, support: SupportSet, components: Sequence[SMComponent], inner: SEHyper | None = None,
                 amplitude_sq: float = 1.0):
        inner = inner or SEHyper()
        self.support = _as_support(support, inner)
        if self.support.bottleneck != 1:
            raise InputError("the spectral-mixture deep kernel needs a scalar hidden layer (H = 1)")
        self.components = check_mixture(components)
        if self.components[0].dim != 1:
            raise InputError("outer spectral components must be one-dimensional")
        (self.amplitude_sq,) = _positive_tuple(amplitude_sq, "amplitude_sq")
        self._cond = _ConditionedInner(self.support, inner)

    @property
    def inner(self) -> SEHyper:
        return self._cond.inner

    def __repr__(self):
        return f"SMSupportKernel(M={self.support.size}, components={list(self.components)!r})"

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2)
        mX, mX2, d2 = self._cond.moments(X, X2)
        dm = mX[:, 0][:, None] - mX2[:, 0][None, :]
        K = np.zeros_like(d2)
        for comp in self.components:
            mu, s2 = comp.mean[0], comp.scale[0]
            c = 1.0 + s2 * d2
            K += comp.weight / np.sqrt(c) * np.exp(-(s2 * dm**2 + d2 * mu**2) / (2.0 * c)) * np.cos(mu * dm / c)
        return self.amplitude_sq * K

    def diag(self, X):
        return np.full(as_points(X).shape[0], self.amplitude_sq)


class NTKKernel(Kernel):
    """Tangent kernel of the deep trigonometric network, unit hyperparameters.

    ``k_dgp + H * kse * (1 + 2 (1 - kse))**(-(H + 2) / 2)``; for ``H = 1`` the
    second term is ``kse * k_dgp**3``.
    """

    kind = "ntk_dgp"

    def __init__(self, bottleneck: int = 1):
        if int(bottleneck) != bottleneck or bottleneck < 1:
            raise InputError("bottleneck must be a positive integer")
        self.bottleneck = int(bottleneck)

    def __repr__(self):
        return f"NTKKernel(bottleneck={self.bottleneck})"

    def gram(self, X, X2=None):
        X, X2 = _pair_inputs(X, X2)
        H = self.bottleneck
        kse = np.exp(-0.5 * scaled_sq_dist(X, X2, np.ones(X.shape[1])))
        base = 1.0 + 2.0 * (1.0 - kse)
        # share the DGP term so k_ntk >= k_dgp holds in floating point too
        k_dgp = DGPKernel(DGPHyper(bottleneck=H)).gram(X, X2)
        return k_dgp + H * kse * base ** (-(H + 2) / 2.0)

    def diag(self, X):
        return np.full(as_points(X).shape[0], 1.0 + self.bottleneck)


# ---------------------------------------------------------------------------
# scalar conveniences
# ---------------------------------------------------------------------------


def _pair(x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"x and y must be vectors of equal length, got {x.shape} and {y.shape}")
    return x, y


def _check_dim(x, scales: tuple[float, ...], name: str):
    if len(scales) > 1 and len(scales) != x.size:
        raise InputError(f"{name} has {len(scales)} entries but inputs have dimension {x.size}")


def se_kernel(x, y, h: SEHyper = SEHyper()) -> float:
    x, y = _pair(x, y)
    _check_dim(x, h.lengthscales, "lengthscales")
    return SEKernel(h)(x, y)


def sm_kernel(x, y, comps: Sequence[SMComponent], amplitude_sq: float = 1.0) -> float:
    x, y = _pair(x, y)
    return SMKernel(comps, amplitude_sq)(x, y)


def dgp_se_kernel(x, y, h: DGPHyper = DGPHyper()) -> float:
    x, y = _pair(x, y)
    _check_dim(x, h.inner.lengthscales, "inner lengthscales")
    return DGPKernel(h)(x, y)


def dgp_support_kernel(x, y, support: SupportSet, inner: SEHyper = SEHyper(), outer: SEHyper = SEHyper()) -> float:
    x, y = _pair(x, y)
    return SupportKernel(support, inner, outer)(x, y)


def sm_dgp_kernel(x, y, support: SupportSet, comps: Sequence[SMComponent], inner: SEHyper = SEHyper()) -> float:
    x, y = _pair(x, y)
    return SMSupportKernel(support, comps, inner)(x, y)


def ntk_dgp_kernel(x, y, H: int = 1) -> float:
    x, y = _pair(x, y)
    return NTKKernel(H)(x, y)


def kernel_matrix(kernel: Kernel, X, X2=None) -> np.ndarray:
    """Gram matrix; symmetric to rounding when ``X2`` is omitted."""
    if X2 is None:
        K = kernel.gram(X)
        return 0.5 * (K + K.T)
    return kernel.gram(X, X2)


# ---------------------------------------------------------------------------
# conditioning
# ---------------------------------------------------------------------------


def jittered_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, adding diagonal jitter only on failure.

    Jitter starts at ``1e-10 * mean(diag K)`` and grows tenfold up to
    ``1e-4 * mean(diag K)``.  Returns the factor and the jitter used.
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return linalg.cholesky(K, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    jitter = JITTER_START * scale
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        try:
            return linalg.cholesky(K + jitter * np.eye(n), lower=True), jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(K)
    raise NumericalError(
        f"Cholesky failed with jitter up to {JITTER_MAX:g} x mean diagonal; condition number {cond:.3e}"
    )


class GPPosterior:
    """Zero-mean GP conditioned on ``(X, y)`` with Gaussian noise.

    ``y`` may be a vector or an ``(N, H)`` matrix of independent outputs
    sharing the kernel.
    """

    def __init__(self, X, y, kernel: Kernel, noise_var: float):
        self.X = as_points(X) if np.size(X) else np.zeros((0, 0))
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.X.shape[0]:
            raise InputError(f"{self.X.shape[0]} inputs but {y.shape[0]} targets")
        if noise_var < 0:
            raise InputError("noise_var must be nonnegative")
        self.y = y
        self.kernel = kernel
        self.noise_var = float(noise_var)
        n = self.X.shape[0]
        if n:
            K = kernel_matrix(kernel, self.X) + self.noise_var * np.eye(n)
        else:
            K = np.zeros((0, 0))
        self.chol, self.jitter = jittered_cholesky(K)
        self.alpha = linalg.cho_solve((self.chol, True), y) if n else np.zeros_like(y)

    @property
    def size(self) -> int:
        return self.X.shape[0]

    def _cross(self, Xs):
        Xs = as_points(Xs)
        if not self.size:
            return Xs, np.zeros((Xs.shape[0], 0))
        return Xs, self.kernel.gram(Xs, self.X)

    def mean(self, Xs) -> np.ndarray:
        Xs, Ks = self._cross(Xs)
        if not self.size:
            return np.zeros((Xs.shape[0],) + self.y.shape[1:])
        return Ks @ self.alpha

    def cross_covariance(self, Xs, Xs2) -> np.ndarray:
        Xs, Ks = self._cross(Xs)
        Xs2, Ks2 = self._cross(Xs2)
        prior = self.kernel.gram(Xs, Xs2)
        if not self.size:
            return prior
        A = linalg.solve_triangular(self.chol, Ks.T, lower=True)
        B = linalg.solve_triangular(self.chol, Ks2.T, lower=True)
        return prior - A.T @ B

    def covariance(self, Xs) -> np.ndarray:
        C = self.cross_covariance(Xs, Xs)
        return 0.5 * (C + C.T)

    def variance(self, Xs, clamp: bool = True) -> np.ndarray:
        Xs, Ks = self._cross(Xs)
        prior = self.kernel.diag(Xs)
        if self.size:
            A = linalg.solve_triangular(self.chol, Ks.T, lower=True)
            var = prior - (A * A).sum(0)
        else:
            var = prior
        if not clamp:
            return var
        tol = NEGATIVE_VARIANCE_TOL * max(1.0, float(np.max(prior, initial=1.0)))
        if np.any(var < -tol):
            raise NumericalError(f"negative posterior variance {var.min():.3e}")
        return np.maximum(var, 0.0)

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        return self.mean(Xs), self.variance(Xs)


def gp_condition(X, y, kernel: Kernel, noise_var: float = 0.0) -> GPPosterior:
    """Condition a zero-mean GP with ``kernel`` on noisy observations ``(X, y)``."""
    return GPPosterior(X, y, kernel, noise_var)
