"""Marginal laws and characteristic functions of random network outputs.

Covered here:

* the Laplace output law of a two-unit linear network ``f = W Omega x``;
* the Gaussian marginal of a shallow trig net at a single input;
* the characteristic function of a phase-shifted shallow trig net, by exact
  one-dimensional quadrature, by Monte Carlo and by an order-3
  Gauss-Hermite truncation;
* the Gaussian lower bound on the deep-net characteristic function and an
  epsilon-ball estimate of the output density at the origin.

Phase-shift reduction.  For ``f = n**-0.5 sum_i wc_i cos(a_i + psi) +
ws_i sin(a_i - psi)`` with ``a_i = omega_i . x`` and ``w ~ N(0, s2)``::

    cos(a + psi)**2 + sin(a - psi)**2 = 1 - sin(2 psi) sin(2 a)

so ``E exp(i q f) = exp(-q2 s2 / 2) * I(c / n)**n`` with
``c = q2 s2 sin(2 psi) / 2`` and ``I(c) = E exp(c sin(2 a))``.  Because
``a = omega . x`` is Gaussian with variance ``sum_d var_d x_d**2`` the
expectation is a single one-dimensional integral for any input dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, stats

from .errors import InputError, NumericalError
from .kernels import DGPHyper, DGPKernel, as_points
from .montecarlo import MCEstimate, _batches, deep_outputs
from .networks import ConstantPhase, LinearPhase, replica_rng

__all__ = [
    "GaussHermiteConstants",
    "PRINTED_GH",
    "hermite_constants",
    "laplace_marginal_pdf",
    "laplace_marginal_cdf",
    "linear_net_outputs",
    "shallow_marginal_pdf",
    "phase_shift_outputs",
    "phase_shift_charfn_numeric",
    "phase_shift_charfn_integrand_mc",
    "phase_shift_charfn_mc",
    "phase_shift_charfn_gh",
    "dgp_charfn_lower_bound",
    "ZeroConcentration",
    "zero_concentration_from_outputs",
    "zero_concentration_check",
]

QUAD_RTOL = 1e-8
# Gaussian tails beyond this many standard deviations are below 1e-30.
QUAD_HALF_WIDTH = 12.0


# ---------------------------------------------------------------------------
# Gauss-Hermite constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussHermiteConstants:
    """Order-3 rule: weight ``lambda0`` at node 0, ``lambda1`` at ``+-z1``."""

    lambda0: float
    lambda1: float
    z1: float
    order: int = 3

    def __post_init__(self):
        if self.order != 3:
            raise InputError("only the order-3 rule is supported")


PRINTED_GH = GaussHermiteConstants(1.18, 0.30, 1.22)


def hermite_constants() -> GaussHermiteConstants:
    """Exact order-3 constants from the Hermite roots and weights."""
    nodes, weights = hermgauss(3)
    return GaussHermiteConstants(float(weights[1]), float(weights[2]), float(nodes[2]))


# ---------------------------------------------------------------------------
# closed-form marginals
# ---------------------------------------------------------------------------


def _laplace_scale(sigma1, sigma2, x_norm) -> float:
    if not (sigma1 > 0 and sigma2 > 0):
        raise InputError("sigma1 and sigma2 must be positive")
    if not x_norm > 0:
        raise InputError("x_norm must be positive; the output is degenerate at x = 0")
    return float(sigma1 * sigma2 * x_norm)


def laplace_marginal_pdf(f, sigma1: float, sigma2: float, x_norm: float):
    """Output density of ``f = W Omega x`` with two hidden units.

    ``exp(-|f| / kappa) / (2 kappa)`` with ``kappa = sigma1 sigma2 |x|``.
    """
    kappa = _laplace_scale(sigma1, sigma2, x_norm)
    return np.exp(-np.abs(f) / kappa) / (2.0 * kappa)


def laplace_marginal_cdf(f, sigma1: float, sigma2: float, x_norm: float):
    kappa = _laplace_scale(sigma1, sigma2, x_norm)
    return stats.laplace.cdf(f, scale=kappa)


def linear_net_outputs(x, samples: int, sigma1: float = 1.0, sigma2: float = 1.0,
                       seed: int = 0, hidden: int = 2) -> np.ndarray:
    """``samples`` draws of ``W Omega x`` with ``Omega`` (hidden x D), ``W`` (1 x hidden)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = replica_rng(seed, 0)
    Omega = rng.standard_normal((samples, hidden, x.size)) * sigma1
    W = rng.standard_normal((samples, hidden)) * sigma2
    return np.einsum("sh,sh->s", W, Omega @ x)


def shallow_marginal_pdf(f, weight_var: float = 1.0):
    """``N(f | 0, weight_var)``, whatever the width and feature law."""
    if not weight_var > 0:
        raise InputError("weight_var must be positive")
    return stats.norm.pdf(f, scale=np.sqrt(weight_var))


# ---------------------------------------------------------------------------
# phase-shifted shallow net
# ---------------------------------------------------------------------------


def _psi_at(psi, x: np.ndarray) -> float:
    if isinstance(psi, (ConstantPhase, LinearPhase)):
        return float(psi(x[None, :])[0])
    return float(psi)


def _feature_std(feature_var, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(feature_var, dtype=float))
    if np.any(v <= 0):
        raise InputError("feature_var must be positive")
    if v.size == 1:
        v = np.full(dim, v[0])
    if v.size != dim:
        raise InputError(f"feature_var has {v.size} entries for dimension {dim}")
    return np.sqrt(v)


def _phase_setup(q, x, psi, weight_var, feature_var, width):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not weight_var > 0:
        raise InputError("weight_var must be positive")
    if int(width) != width or width < 1:
        raise InputError("width must be a positive integer")
    std = _feature_std(feature_var, x.size)
    gauss = float(np.exp(-0.5 * q * q * weight_var))
    c = 0.5 * q * q * weight_var * np.sin(2.0 * _psi_at(psi, x))
    proj_std = float(np.sqrt(np.sum((std * x) ** 2)))
    return x, std, gauss, c, proj_std


def phase_shift_outputs(x, psi, samples: int, width: int = 1, weight_var: float = 1.0,
                        feature_var=1.0, seed: int = 0, batch: int = 65536) -> np.ndarray:
    """Outputs of ``samples`` independently drawn phase-shifted nets at ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    std = _feature_std(feature_var, x.size)
    shift = _psi_at(psi, x)
    out = np.empty(samples)
    for b, sl in _batches(samples, batch):
        rng = replica_rng(seed, b)
        B = sl.stop - sl.start
        a = (rng.standard_normal((B, width, x.size)) * std) @ x
        w = rng.standard_normal((B, 2 * width)) * np.sqrt(weight_var)
        out[sl] = ((w[:, :width] * np.cos(a + shift)).sum(1)
                   + (w[:, width:] * np.sin(a - shift)).sum(1)) / np.sqrt(width)
    return out


def phase_shift_charfn_numeric(q: float, x, psi, weight_var: float = 1.0, feature_var=1.0,
                               width: int = 1) -> float:
    """``E exp(i q f)`` for the phase-shifted net by adaptive quadrature.

    ``width=1`` is the single-unit integral ``exp(-q2 s2/2) E exp(c sin 2a)``.
    Raises :class:`NumericalError` when the estimated relative error of the
    integral exceeds 1e-8.
    """
    x, _, gauss, c, s = _phase_setup(q, x, psi, weight_var, feature_var, width)
    if c == 0.0:
        return gauss
    cn = c / width
    if s == 0.0:
        return gauss  # a = 0 almost surely
    half = QUAD_HALF_WIDTH * s
    # one subinterval per half-period of sin(2 a) keeps each piece smooth
    pieces = max(1, int(np.ceil(2 * half / (np.pi / 2))))
    edges = np.linspace(-half, half, min(pieces, 400) + 1)
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(lambda t: stats.norm.pdf(t, scale=s) * np.exp(cn * np.sin(2 * t)),
                                lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        err += e
    if not np.isfinite(total) or err > QUAD_RTOL * abs(total):
        raise NumericalError(f"quadrature did not converge: estimate {total}, error {err}")
    return gauss * total**width


def phase_shift_charfn_integrand_mc(q: float, x, psi, weight_var: float = 1.0, feature_var=1.0,
                                    width: int = 1, samples: int = 10**6, seed: int = 0) -> MCEstimate:
    """Monte Carlo over ``omega`` of the same integral the quadrature evaluates."""
    x, std, gauss, c, _ = _phase_setup(q, x, psi, weight_var, feature_var, width)
    rng = replica_rng(seed, 0)
    a = (rng.standard_normal((samples, x.size)) * std) @ x
    vals = np.exp(c / width * np.sin(2 * a))
    base = MCEstimate.from_samples(vals, seed)
    # delta method for the width-th power
    value = gauss * base.value**width
    se = gauss * width * abs(base.value) ** (width - 1) * base.std_error
    return MCEstimate(float(value), float(se), samples, int(seed))


def phase_shift_charfn_mc(q: float, x, psi, weight_var: float = 1.0, feature_var=1.0,
                          width: int = 1, samples: int = 10**6, seed: int = 0) -> MCEstimate:
    """``mean cos(q f)`` over sampled networks (the imaginary part vanishes by symmetry)."""
    f = phase_shift_outputs(x, psi, samples, width, weight_var, feature_var, seed)
    return MCEstimate.from_samples(np.cos(q * f), seed)


def phase_shift_charfn_gh(q: float, x, psi, weight_var: float = 1.0, feature_var: float = 1.0,
                          constants: GaussHermiteConstants = PRINTED_GH) -> float:
    """Order-3 Gauss-Hermite truncation, features with a common variance.

    ``exp(-q2 s2/2) (l0/sqrt(pi))**D {1 + 2 (l1/l0) sum_d cosh[c sin(2 sqrt(2) sF z1 x_d)]}``.
    Not exact: the rule is too coarse once ``c`` or ``sF |x|`` is of order one.
    """
    x, std, gauss, c, _ = _phase_setup(q, x, psi, weight_var, feature_var, 1)
    if not np.allclose(std, std[0]):
        raise InputError("the truncated expansion assumes one feature variance for all dimensions")
    l0, l1, z1 = constants.lambda0, constants.lambda1, constants.z1
    arg = c * np.sin(2.0 * np.sqrt(2.0) * std[0] * z1 * x)
    return float(gauss * (l0 / np.sqrt(np.pi)) ** x.size * (1.0 + 2.0 * l1 / l0 * np.cosh(arg).sum()))


# ---------------------------------------------------------------------------
# deep-net bounds
# ---------------------------------------------------------------------------


def dgp_charfn_lower_bound(t, K_dgp) -> float:
    """``exp(-t' K t / 2)``, a lower bound on ``Re E exp(i t . f)`` for the deep net."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    K = np.atleast_2d(np.asarray(K_dgp, dtype=float))
    if K.shape != (t.size, t.size):
        raise InputError(f"K has shape {K.shape} for {t.size} inputs")
    return float(np.exp(-0.5 * t @ K @ t))


@dataclass(frozen=True)
class ZeroConcentration:
    """Density at the origin estimated as ``P(max_i |f_i| < eps) / (2 eps)**N``.

    ``gaussian_ref`` is the same box average for ``N(0, K)`` so both numbers
    carry the same smoothing; ``gaussian_density`` is the exact value at 0.
    """

    empirical: float
    std_error: float
    gaussian_ref: float
    gaussian_density: float
    eps: float
    hits: int
    samples: int

    @property
    def reliable(self) -> bool:
        return self.hits > 0

    def exceeds_reference(self, n_se: float = 4.0) -> bool:
        return self.reliable and self.empirical >= self.gaussian_ref - n_se * self.std_error


def _gaussian_box(K: np.ndarray, eps: float) -> float:
    N = K.shape[0]
    if N == 1:
        s = np.sqrt(K[0, 0])
        return float((stats.norm.cdf(eps / s) - stats.norm.cdf(-eps / s)) / (2 * eps))
    mvn = stats.multivariate_normal(np.zeros(N), K, allow_singular=False)
    lo, hi = -eps * np.ones(N), eps * np.ones(N)
    return float(mvn.cdf(hi, lower_limit=lo) / (2 * eps) ** N)


def zero_concentration_from_outputs(outputs, K, eps: float) -> ZeroConcentration:
    """Box estimate from ``(S, N)`` joint output draws and the reference covariance ``K``."""
    F = np.asarray(outputs, dtype=float)
    F = F[:, None] if F.ndim == 1 else F
    K = np.atleast_2d(np.asarray(K, dtype=float))
    S, N = F.shape
    if K.shape != (N, N):
        raise InputError(f"K has shape {K.shape} for {N} inputs")
    if not eps > 0:
        raise InputError("eps must be positive")
    inside = np.all(np.abs(F) < eps, axis=1)
    hits = int(inside.sum())
    vol = (2 * eps) ** N
    p = hits / S
    se = np.sqrt(p * (1 - p) / S) / vol
    density = float(stats.multivariate_normal(np.zeros(N), K).pdf(np.zeros(N)))
    return ZeroConcentration(p / vol, float(se), _gaussian_box(K, eps), density, float(eps), hits, S)


def zero_concentration_check(X, n1: int, n2: int, samples: int, eps: float = 0.05,
                             seed: int = 0, batch: int = 1024, hyper=None) -> ZeroConcentration:
    """Deep-net density at the origin against the ``K_DGP`` Gaussian."""
    hyper = DGPHyper() if hyper is None else hyper
    X = as_points(X)
    F = deep_outputs(X, n1, n2, samples, seed, hyper, batch)
    return zero_concentration_from_outputs(F, DGPKernel(hyper).gram(X), eps)
