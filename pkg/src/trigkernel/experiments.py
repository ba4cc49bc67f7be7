"""Batch experiments behind the ``trigkernel`` command.

Each runner reads its parameters from a :class:`~trigkernel.config.Config`,
writes numeric CSV files into ``out_dir`` and returns their paths.  Inputs
are one-dimensional unless a runner says otherwise.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import REQUIRED, Config, ConfigError
from .csvio import load_csv, read_table, write_csv
from .errors import NumericalError
from .distributions import (
    dgp_charfn_lower_bound,
    hermite_constants,
    laplace_marginal_pdf,
    linear_net_outputs,
    phase_shift_charfn_gh,
    phase_shift_charfn_integrand_mc,
    phase_shift_charfn_mc,
    phase_shift_charfn_numeric,
    phase_shift_outputs,
    PRINTED_GH,
    shallow_marginal_pdf,
)
from .gp_regression import RegressionProblem, log_marginal_likelihood, optimize_hyperparams, predict
from .kernels import (
    DGPHyper,
    DGPKernel,
    NTKKernel,
    SEHyper,
    SEKernel,
    SMComponent,
    SMKernel,
)
from .montecarlo import (
    deep_outputs,
    deep_pair_products,
    empirical_ntk_gram,
    empirical_ntks,
    estimates,
    gradient_descent_train,
    ntk_regression_mean,
    shallow_outputs,
    shallow_pair_products,
    width_allowance,
)
from .networks import (
    ConstantPhase,
    GaussianFeatures,
    LinearPhase,
    MixtureFeatures,
    replica_rng,
    sample_deep_net,
    sample_shallow_net,
)

__all__ = ["EXPERIMENTS", "run_experiment"]


def _se_hyper(cfg: Config, prefix: str) -> SEHyper:
    return SEHyper(cfg.get_float(f"{prefix}.amplitude_sq", 1.0, positive=True),
                   cfg.get_floats(f"{prefix}.lengthscale", (1.0,)))


def _dgp_hyper(cfg: Config) -> DGPHyper:
    return DGPHyper(_se_hyper(cfg, "inner"), _se_hyper(cfg, "outer"), cfg.get_int("bottleneck", 1, minimum=1))


def _pairs(cfg: Config) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(cfg.get_floats("pairs.x", REQUIRED))
    y = np.asarray(cfg.get_floats("pairs.y", REQUIRED))
    if x.size != y.size:
        raise ConfigError("pairs.x and pairs.y must have the same length")
    return x[:, None], y[:, None]


def _mixture(cfg: Config) -> tuple[SMComponent, ...]:
    weights = cfg.get_floats("mixture.weights", REQUIRED)
    means = cfg.get_floats("mixture.means", REQUIRED)
    scales = cfg.get_floats("mixture.scales", REQUIRED)
    if not len(weights) == len(means) == len(scales):
        raise ConfigError("mixture.weights, mixture.means and mixture.scales must have equal length")
    return tuple(SMComponent(w, (m,), (s,)) for w, m, s in zip(weights, means, scales))


def _psi(cfg: Config):
    kind = cfg.get_str("psi.kind", "constant", choices={"constant", "linear"})
    if kind == "constant":
        return ConstantPhase(cfg.get_float("psi.value", 0.0))
    return LinearPhase(cfg.get_floats("psi.coef", REQUIRED))


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------


def run_covariance(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Empirical covariance against its closed form over a list of widths.

    ``estimator = conditional`` averages the outer weights analytically so
    the error column isolates the finite-width bias and fluctuation;
    ``product`` uses raw ``f(x) f(y)`` products, whose spread does not
    depend on width.
    """
    network = cfg.get_str("network", "shallow", choices={"shallow", "mixture", "deep"})
    widths = cfg.get_ints("widths", (256, 1024, 4096, 16384), minimum=1)
    samples = cfg.get_int("samples", 2000, minimum=2)
    estimator = cfg.get_str("estimator", "conditional", choices={"conditional", "product"})
    batch = cfg.get_int("batch", 64, minimum=1)
    X, Y = _pairs(cfg)
    conditional = estimator == "conditional"
    if network == "deep":
        hyper = _dgp_hyper(cfg)
        kernel = DGPKernel(hyper)
    else:
        hyper_se = _se_hyper(cfg, "kernel")
        if network == "mixture":
            comps = _mixture(cfg)
            features = MixtureFeatures(comps)
            kernel = SMKernel(comps, hyper_se.amplitude_sq)
        else:
            features = GaussianFeatures.from_hyper(hyper_se)
            kernel = SEKernel(hyper_se)
    cfg.check_consumed()
    exact = np.array([kernel(x, y) for x, y in zip(X, Y)])
    rows = []
    for width in widths:
        if network == "deep":
            draws = deep_pair_products(X, Y, width, width, samples, seed, hyper, batch, conditional)
        else:
            draws = shallow_pair_products(X, Y, width, samples, seed, features,
                                          hyper_se.amplitude_sq, batch, conditional)
        for p, est in enumerate(estimates(draws, seed)):
            rows.append([width, p, X[p, 0], Y[p, 0], est.value, est.std_error, exact[p],
                         est.error(exact[p]), width_allowance(width)])
    header = ["width", "pair", "x", "y", "empirical", "std_error", "closed_form", "abs_error", "allowance"]
    return [write_csv(out_dir / "covariance.csv", header, rows)]


# ---------------------------------------------------------------------------
# marginal
# ---------------------------------------------------------------------------


def _shape(f: np.ndarray) -> tuple[float, float, float, float]:
    c = f - f.mean()
    m2, m3, m4 = (c**2).mean(), (c**3).mean(), (c**4).mean()
    return f.mean(), m2, m3 / m2**1.5, m4 / m2**2 - 3.0


def _moments(f: np.ndarray, groups: int = 20) -> list[float]:
    """Mean, variance, skewness and excess kurtosis, each followed by a
    batch-means standard error (valid for heavy tails too)."""
    full = _shape(f)
    parts = np.array([_shape(g) for g in np.array_split(f, groups)])
    se = parts.std(axis=0, ddof=1) / np.sqrt(groups)
    return [v for pair in zip(full, se) for v in pair]


def run_marginal(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Histogram of the output at one input next to the closed-form density.

    The reference density is the Laplace law for ``linear`` and the
    ``N(0, weight_var)`` law otherwise (exact for ``shallow``; for ``deep`` and
    ``phase_shift`` it is the Gaussian with the same variance).
    """
    network = cfg.get_str("network", "shallow", choices={"shallow", "linear", "deep", "phase_shift"})
    samples = cfg.get_int("samples", 100000, minimum=2)
    x = np.asarray(cfg.get_floats("x", (0.7,)))
    bins = cfg.get_int("bins", 40, minimum=1)
    half = cfg.get_float("range", 4.0, positive=True)
    if network == "linear":
        s1 = cfg.get_float("sigma1", 1.0, positive=True)
        s2 = cfg.get_float("sigma2", 1.0, positive=True)
        cfg.check_consumed()
        f = linear_net_outputs(x, samples, s1, s2, seed)
        density = lambda v: laplace_marginal_pdf(v, s1, s2, float(np.linalg.norm(x)))  # noqa: E731
    else:
        width = cfg.get_int("width", 100, minimum=1)
        if network == "deep":
            hyper = _dgp_hyper(cfg)
            var = hyper.outer.amplitude_sq
            batch = cfg.get_int("batch", 256, minimum=1)
            cfg.check_consumed()
            f = deep_outputs(x[None, :], width, width, samples, seed, hyper, batch)[:, 0]
        else:
            var = cfg.get_float("weight_var", 1.0, positive=True)
            feature_var = cfg.get_float("feature_var", 1.0, positive=True)
            if network == "phase_shift":
                psi = _psi(cfg)
                cfg.check_consumed()
                f = phase_shift_outputs(x, psi, samples, width, var, feature_var, seed)
            else:
                cfg.check_consumed()
                f = shallow_outputs(x[None, :], width, samples, seed, GaussianFeatures((feature_var,)),
                                    var, batch=4096)[:, 0]
        density = lambda v: shallow_marginal_pdf(v, var)  # noqa: E731
    edges = np.linspace(-half, half, bins + 1)
    counts, _ = np.histogram(f, edges)
    widths = np.diff(edges)
    p = counts / samples
    rows = [[edges[i], edges[i + 1], 0.5 * (edges[i] + edges[i + 1]), p[i] / widths[i],
             np.sqrt(p[i] * (1 - p[i]) / samples) / widths[i],
             float(np.mean(density(np.linspace(edges[i], edges[i + 1], 33))))]
            for i in range(bins)]
    hist = write_csv(out_dir / "marginal.csv",
                     ["bin_left", "bin_right", "bin_center", "empirical_density", "std_error", "closed_form_density"],
                     rows)
    summary = write_csv(out_dir / "moments.csv",
                        ["mean", "mean_se", "variance", "variance_se", "skewness", "skewness_se",
                         "excess_kurtosis", "excess_kurtosis_se"],
                        [_moments(f)])
    return [hist, summary]


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------


def run_charfn(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Phase-shift characteristic function four ways, plus the Gaussian lower bound.

    With ``deep.inputs`` set, a second table compares the deep-net
    characteristic function on random ``t`` vectors with its bound.
    """
    qs = cfg.get_floats("qs", (0.5, 1.0, 2.0))
    x = np.asarray(cfg.get_floats("x", (0.7,)))
    psi = _psi(cfg)
    weight_var = cfg.get_float("weight_var", 1.0, positive=True)
    feature_var = cfg.get_float("feature_var", 1.0, positive=True)
    width = cfg.get_int("width", 1, minimum=1)
    samples = cfg.get_int("samples", 10**6, minimum=2)
    deep_inputs = cfg.get_floats("deep.inputs", None)
    if deep_inputs is not None:
        hyper = _dgp_hyper(cfg)
        deep_width = cfg.get_int("deep.width", 1000, minimum=1)
        deep_samples = cfg.get_int("deep.samples", 20000, minimum=2)
        n_t = cfg.get_int("deep.tvectors", 20, minimum=1)
        t_scale = cfg.get_float("deep.tscale", 1.0, positive=True)
    cfg.check_consumed()
    exact_gh = hermite_constants()
    rows = []
    for k, q in enumerate(qs):
        integrand = phase_shift_charfn_integrand_mc(q, x, psi, weight_var, feature_var, width, samples, seed + k)
        network = phase_shift_charfn_mc(q, x, psi, weight_var, feature_var, width, samples, seed + k)
        gh_args = (q, x, psi, weight_var, feature_var)
        rows.append([q, phase_shift_charfn_numeric(q, x, psi, weight_var, feature_var, width),
                     phase_shift_charfn_gh(*gh_args, constants=PRINTED_GH),
                     phase_shift_charfn_gh(*gh_args, constants=exact_gh),
                     integrand.value, integrand.std_error, network.value, network.std_error,
                     float(np.exp(-0.5 * q * q * weight_var))])
    header = ["q", "numeric", "gh_printed", "gh_exact", "mc_integrand", "mc_integrand_se",
              "mc_network", "mc_network_se", "lower_bound"]
    paths = [write_csv(out_dir / "charfn.csv", header, rows)]
    if deep_inputs is not None:
        X = np.asarray(deep_inputs)[:, None]
        N = X.shape[0]
        F = deep_outputs(X, deep_width, deep_width, deep_samples, seed, hyper, batch=256)
        K = DGPKernel(hyper).gram(X)
        T = replica_rng(seed, 10**6).standard_normal((n_t, N)) * t_scale
        deep_rows = []
        for i, t in enumerate(T):
            est = estimates(np.cos(F @ t)[:, None], seed)[0]
            deep_rows.append([i, *t, est.value, est.std_error, dgp_charfn_lower_bound(t, K)])
        paths.append(write_csv(out_dir / "deep_charfn.csv",
                               ["index", *[f"t{j}" for j in range(N)], "empirical", "std_error", "lower_bound"],
                               deep_rows))
    return paths


# ---------------------------------------------------------------------------
# NTK
# ---------------------------------------------------------------------------


def run_ntk(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Empirical tangent kernel of sampled nets against the closed form."""
    network = cfg.get_str("network", "deep", choices={"shallow", "deep"})
    widths = cfg.get_ints("widths", (256, 1024, 4096), minimum=1)
    samples = cfg.get_int("samples", 500, minimum=2)
    bottleneck = cfg.get_int("bottleneck", 1, minimum=1)
    X, Y = _pairs(cfg)
    cfg.check_consumed()
    kernel = NTKKernel(bottleneck) if network == "deep" else SEKernel(SEHyper())
    hyper = DGPHyper(bottleneck=bottleneck)
    rows = []
    for width in widths:
        if network == "deep":
            factory = lambda rng: sample_deep_net(width, width, 1, rng, hyper)  # noqa: E731
        else:
            factory = lambda rng: sample_shallow_net(width, 1, rng)  # noqa: E731
        for p, est in enumerate(empirical_ntks(factory, X, Y, samples, seed)):
            target = kernel(X[p], Y[p])
            rows.append([width, p, X[p, 0], Y[p, 0], est.value, est.std_error, target,
                         est.error(target), width_allowance(width)])
    header = ["width", "pair", "x", "y", "empirical", "std_error", "closed_form", "abs_error", "allowance"]
    return [write_csv(out_dir / "ntk.csv", header, rows)]


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def run_train(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Gradient descent on a deep net against ridgeless NTK regression.

    Targets are ``sin(frequency * x)`` on an even grid; predictions are made
    at the grid midpoints.
    """
    width = cfg.get_int("width", 1024, minimum=1)
    bottleneck = cfg.get_int("bottleneck", 1, minimum=1)
    n_train = cfg.get_int("n_train", 8, minimum=2)
    domain = cfg.get_floats("domain", (-2.0, 2.0))
    if len(domain) != 2 or not domain[0] < domain[1]:
        raise ConfigError("domain must be two increasing numbers")
    lo, hi = domain
    freq = cfg.get_float("frequency", 1.5)
    steps = cfg.get_int("steps", 5000, minimum=0)
    tol = cfg.get_float("tol", 1e-6, positive=True)
    lr = cfg.get_float("lr", None, positive=True)
    center = cfg.get_bool("center", True)
    cfg.check_consumed()
    X = np.linspace(lo, hi, n_train)[:, None]
    y = np.sin(freq * X[:, 0])
    X_star = 0.5 * (X[1:] + X[:-1])
    net = sample_deep_net(width, width, 1, replica_rng(seed, 0), DGPHyper(bottleneck=bottleneck))
    trace = gradient_descent_train(net, X, y, lr, steps, tol, center)
    if trace.diverged:
        raise NumericalError(f"gradient descent diverged at step {trace.steps} with lr = {trace.lr:g}")
    trained = trace.predict(X_star)
    reference = ntk_regression_mean(X_star, X, y, bottleneck)
    K0, K1 = empirical_ntk_gram(trace.initial_net, X), empirical_ntk_gram(trace.net, X)
    drift = float(np.linalg.norm(K1 - K0) / np.linalg.norm(K0))
    loss = write_csv(out_dir / "loss.csv", ["step", "loss"], list(enumerate(trace.losses)))
    preds = write_csv(out_dir / "predictions.csv", ["x", "trained", "ntk_regression", "abs_diff"],
                      [[xs[0], a, b, abs(a - b)] for xs, a, b in zip(X_star, trained, reference)])
    summary = write_csv(out_dir / "summary.csv",
                        ["final_loss", "steps", "lr", "converged", "diverged", "max_abs_diff", "ntk_relative_change"],
                        [[trace.losses[-1], trace.steps, trace.lr, trace.converged, trace.diverged,
                          float(np.max(np.abs(trained - reference))), drift]])
    return [loss, preds, summary]


# ---------------------------------------------------------------------------
# GP regression on a CSV dataset
# ---------------------------------------------------------------------------


def _fit_kernel(cfg: Config, dim: int):
    kind = cfg.get_str("kernel.kind", "se", choices={"se", "sm", "dgp"})
    if kind == "se":
        return SEKernel(_se_hyper(cfg, "kernel"))
    if kind == "dgp":
        return DGPKernel(_dgp_hyper(cfg))
    if dim != 1:
        raise ConfigError("kernel.kind = sm supports one input column")
    return SMKernel(_mixture(cfg), cfg.get_float("kernel.amplitude_sq", 1.0, positive=True))


def run_fit(cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    """Fit GP hyperparameters on ``data.train`` and predict at ``data.test``."""
    train = cfg.get_path("data.train", REQUIRED)
    test = cfg.get_path("data.test", None)
    features = cfg.get_strs("data.features", ("x",))
    target = cfg.get_str("data.target", "y")
    noise_var = cfg.get_float("noise_var", 1e-2, positive=True)
    optimize = cfg.get_bool("optimize", True)
    restarts = cfg.get_int("restarts", 5, minimum=1)
    budget = cfg.get_int("budget", 2000, minimum=1)
    kernel = _fit_kernel(cfg, len(features))
    cfg.check_consumed()
    X, y = load_csv(train, features, target)
    problem = RegressionProblem(X, y, kernel, noise_var)
    initial_theta = kernel.hyperparameters()
    if optimize:
        fit = optimize_hyperparams(problem, budget=budget, restarts=restarts, seed=seed)
        problem = problem.replace(fit.kernel, fit.noise_var)
        summary = [fit.log_marginal_likelihood, fit.initial_log_marginal_likelihood, fit.noise_var,
                   fit.converged, fit.evaluations]
    else:
        lml = log_marginal_likelihood(problem)
        summary = [lml, lml, noise_var, True, 0]
    fitted_theta = problem.kernel.hyperparameters()
    paths = [
        write_csv(out_dir / "hyperparameters.csv", ["index", "initial", "fitted"],
                  [[i, a, b] for i, (a, b) in enumerate(zip(initial_theta, fitted_theta))]),
        write_csv(out_dir / "fit_summary.csv",
                  ["log_marginal_likelihood", "initial_log_marginal_likelihood", "noise_var",
                   "converged", "evaluations"], [summary]),
    ]
    if test is not None:
        header, _ = read_table(test)
        X_test, y_test = load_csv(test, features, target if target in header else None)
    else:
        X_test, y_test = X, y
    mean, var = predict(problem, X_test)
    cols = list(features) + ["mean", "variance"]
    rows = [list(xr) + [m, v] for xr, m, v in zip(X_test, mean, var)]
    if y_test is not None:
        cols.append(target)
        rows = [r + [t] for r, t in zip(rows, y_test)]
    paths.append(write_csv(out_dir / "predictions.csv", cols, rows))
    return paths


EXPERIMENTS = {
    "covariance": run_covariance,
    "marginal": run_marginal,
    "charfn": run_charfn,
    "ntk": run_ntk,
    "train": run_train,
    "fit": run_fit,
}


def run_experiment(name: str, cfg: Config, seed: int, out_dir: Path) -> list[Path]:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return EXPERIMENTS[name](cfg, seed, out_dir)
