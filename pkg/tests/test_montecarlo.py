import numpy as np
import pytest

from trigkernel import (
    DGPHyper,
    DGPKernel,
    InputError,
    MCEstimate,
    NTKKernel,
    SEKernel,
    SupportKernel,
    SupportSet,
    deep_outputs,
    deep_pair_products,
    empirical_covariances,
    empirical_ntk_gram,
    empirical_ntks,
    estimates,
    gp_condition,
    gradient_descent_train,
    ntk_regression_mean,
    sample_deep_net,
    sample_shallow_net,
    shallow_outputs,
    shallow_pair_products,
    two_stage_pair_products,
    width_allowance,
)
from trigkernel.networks import replica_rng

X = np.array([[0.0], [0.3], [-1.0]])
Y = np.array([[0.5], [1.5], [1.0]])


def closed(kernel, X, Y):
    return np.array([kernel(x, y) for x, y in zip(X, Y)])


class TestMCEstimate:
    def test_from_samples(self):
        e = MCEstimate.from_samples([1.0, 3.0], seed=0)
        assert e.value == 2.0 and e.std_error == pytest.approx(1.0)

    def test_within(self):
        e = MCEstimate(1.0, 0.1, 10, 0)
        assert e.within(1.35) and not e.within(1.45)
        assert e.within(1.45, allowance=0.1)

    @pytest.mark.parametrize("vals", [[1.0], []])
    def test_too_few_samples(self, vals):
        with pytest.raises(InputError):
            MCEstimate.from_samples(vals, 0)

    def test_allowance_shrinks(self):
        assert width_allowance(100) == pytest.approx(0.03)
        assert width_allowance(10**4) < width_allowance(100)

    def test_estimates_per_column(self):
        out = estimates(np.arange(12.0).reshape(4, 3), 0)
        assert [e.value for e in out] == [4.5, 5.5, 6.5]


class TestShallowCollapsed:
    def test_deterministic(self):
        a = shallow_pair_products(X, Y, 16, 100, seed=3)
        assert np.array_equal(a, shallow_pair_products(X, Y, 16, 100, seed=3))
        assert not np.array_equal(a, shallow_pair_products(X, Y, 16, 100, seed=4))

    @pytest.mark.parametrize("conditional", [False, True])
    def test_unbiased_at_any_width(self, conditional):
        # E cos(omega . tau) is the SE kernel exactly, so no width bias
        S = shallow_pair_products(X, Y, 8, 20_000, seed=1, conditional=conditional)
        for e, k in zip(estimates(S, 1), closed(SEKernel(), X, Y)):
            assert e.within(k, n_se=4)

    def test_conditional_has_smaller_error(self):
        prod = estimates(shallow_pair_products(X, Y, 64, 4000, seed=2), 2)
        cond = estimates(shallow_pair_products(X, Y, 64, 4000, seed=2, conditional=True), 2)
        assert all(c.std_error < p.std_error for c, p in zip(cond, prod))

    def test_quadrupling_samples_halves_error(self):
        small = estimates(shallow_pair_products(X, Y, 16, 4000, seed=5), 5)
        large = estimates(shallow_pair_products(X, Y, 16, 16_000, seed=5), 5)
        for s, l in zip(small, large):
            assert l.std_error == pytest.approx(s.std_error / 2, rel=0.2)

    def test_agrees_with_explicit_networks(self):
        genuine = empirical_covariances(lambda r: sample_shallow_net(8, 1, r), X, Y, 4000, seed=9)
        collapsed = estimates(shallow_pair_products(X, Y, 8, 4000, seed=9), 9)
        for g, c in zip(genuine, collapsed):
            assert abs(g.value - c.value) <= 4 * np.hypot(g.std_error, c.std_error)

    def test_pair_shape_mismatch(self):
        with pytest.raises(InputError):
            shallow_pair_products(X, Y[:2], 4, 10)


class TestDeepCollapsed:
    def test_conditional_close_to_kernel(self):
        S = deep_pair_products(X, Y, 256, 256, 2000, seed=0, conditional=True)
        for e, k in zip(estimates(S, 0), closed(DGPKernel(), X, Y)):
            assert e.within(k, n_se=4, allowance=width_allowance(256))

    def test_conditional_fluctuation_shrinks_with_width(self):
        narrow = deep_pair_products(X, Y, 16, 16, 1000, seed=1, conditional=True).std(0)
        wide = deep_pair_products(X, Y, 1024, 1024, 1000, seed=1, conditional=True).std(0)
        assert np.all(wide < narrow / 3)

    @pytest.mark.parametrize("H", [1, 3])
    def test_product_estimator_agrees_with_explicit_nets(self, H):
        hyper = DGPHyper(bottleneck=H)
        genuine = empirical_covariances(lambda r: sample_deep_net(16, 16, 1, r, hyper), X, Y, 3000, seed=4)
        collapsed = estimates(deep_pair_products(X, Y, 16, 16, 3000, seed=4, hyper=hyper), 4)
        for g, c in zip(genuine, collapsed):
            assert abs(g.value - c.value) <= 4 * np.hypot(g.std_error, c.std_error)

    def test_identical_points(self):
        S = deep_pair_products(X, X, 8, 8, 50, seed=0, conditional=True)
        assert np.allclose(S, 1.0)


WIDTHS = (256, 1024, 4096, 16384)


def monotone_within_error(errors, ses):
    return all(b <= a + 4 * np.hypot(sa, sb) for a, b, sa, sb in zip(errors, errors[1:], ses, ses[1:]))


class TestWidthConvergence:
    def test_shallow(self):
        target = closed(SEKernel(), X, Y)
        errs, ses = [], []
        for n in WIDTHS:
            est = estimates(shallow_pair_products(X, Y, n, 400, seed=7, conditional=True), 7)
            errs.append(max(e.error(t) for e, t in zip(est, target)))
            ses.append(max(e.std_error for e in est))
        assert monotone_within_error(errs, ses)

    def test_deep(self):
        target = closed(DGPKernel(), X, Y)
        errs, ses = [], []
        for n in WIDTHS:
            est = estimates(deep_pair_products(X, Y, n, n, 200, seed=7, conditional=True), 7)
            errs.append(max(e.error(t) for e, t in zip(est, target)))
            ses.append(max(e.std_error for e in est))
        assert monotone_within_error(errs, ses)
        assert errs[-1] < errs[0]


class TestTwoStage:
    def test_matches_support_kernel(self):
        support = SupportSet(np.array([[-1.0], [0.0], [1.0]]), np.array([[0.5, -0.2, 0.3]]), noise_var=0.01)
        kernel = SupportKernel(support)
        inner = gp_condition(support.inputs, support.outputs.T, SEKernel(), support.noise_var)
        S = two_stage_pair_products(X, Y, inner, 512, 4000, seed=0)
        for e, k in zip(estimates(S, 0), closed(kernel, X, Y)):
            assert e.within(k, n_se=4, allowance=width_allowance(512))


class TestOutputs:
    def test_shallow_outputs_match_explicit_nets(self):
        fast = shallow_outputs(X, 5, 4, seed=6, batch=1)
        slow = np.array([sample_shallow_net(5, 1, replica_rng(6, b))(X) for b in range(4)])
        assert np.allclose(fast, slow, atol=1e-12)

    def test_deep_outputs_variance(self):
        F = deep_outputs(X, 32, 32, 20_000, seed=2)
        assert np.allclose(F.var(0), 1.0, atol=0.05)

    def test_deep_outputs_covariance(self):
        F = deep_outputs(X, 256, 256, 20_000, seed=3)
        emp = F.T @ F / F.shape[0]
        K = DGPKernel().gram(X)
        assert np.max(np.abs(emp - K)) < 0.05


class TestNTK:
    def test_shallow_ntk_is_se(self):
        est = empirical_ntks(lambda r: sample_shallow_net(64, 1, r), X, Y, 400, seed=0)
        for e, k in zip(est, closed(SEKernel(), X, Y)):
            assert e.within(k, n_se=4, allowance=width_allowance(64))

    def test_deep_ntk_diagonal(self):
        est = empirical_ntks(lambda r: sample_deep_net(256, 256, 1, r), X, X, 200, seed=1)
        for e in est:
            assert e.within(2.0, n_se=4, allowance=width_allowance(256))

    def test_gram_symmetric_psd(self):
        net = sample_deep_net(32, 32, 1, 0)
        G = empirical_ntk_gram(net, np.linspace(-2, 2, 6)[:, None])
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() > -1e-10


class TestTraining:
    def setup_method(self):
        self.X = np.linspace(-2, 2, 6)[:, None]
        self.y = np.sin(self.X[:, 0])

    def test_zero_learning_rate_keeps_weights(self):
        net = sample_shallow_net(20, 1, 0)
        trace = gradient_descent_train(net, self.X, self.y, lr=0.0, steps=5)
        assert np.array_equal(trace.net.parameters(), net.parameters())
        assert np.all(trace.losses == trace.losses[0])

    def test_loss_monotone_with_default_rate(self):
        trace = gradient_descent_train(sample_shallow_net(64, 1, 1), self.X, self.y, steps=300)
        assert np.all(np.diff(trace.losses) <= 1e-12)
        assert trace.losses[-1] < 0.1 * trace.losses[0]

    def test_centered_starts_at_zero(self):
        net = sample_deep_net(32, 32, 1, 2)
        trace = gradient_descent_train(net, self.X, self.y, steps=0, center=True)
        assert trace.losses[0] == pytest.approx(0.5 * self.y @ self.y)
        assert np.allclose(trace.predict(self.X), 0.0)

    def test_tolerance_stops_early(self):
        trace = gradient_descent_train(sample_shallow_net(64, 1, 3), self.X, self.y, steps=5000, tol=1e-3)
        assert trace.converged and trace.steps < 5000 and trace.losses[-1] < 1e-3

    def test_divergence_flagged(self):
        trace = gradient_descent_train(sample_shallow_net(16, 1, 4), self.X, self.y, lr=50.0, steps=200)
        assert trace.diverged

    def test_negative_rate_rejected(self):
        with pytest.raises(InputError):
            gradient_descent_train(sample_shallow_net(4, 1, 0), self.X, self.y, lr=-1.0)


class TestNTKConstancy:
    def test_tangent_kernel_stays_put_during_training(self):
        # wide-net claim checked at finite width: width 4096, 8 points, <= 5% drift
        Xt = np.linspace(-2, 2, 8)[:, None]
        net = sample_deep_net(4096, 4096, 1, replica_rng(0, 0))
        trace = gradient_descent_train(net, Xt, np.sin(1.5 * Xt[:, 0]), steps=20_000, tol=1e-6, center=True)
        K0, K1 = empirical_ntk_gram(trace.initial_net, Xt), empirical_ntk_gram(trace.net, Xt)
        drift = float(np.linalg.norm(K1 - K0) / np.linalg.norm(K0))
        assert drift <= 0.05, f"relative NTK change {drift:.3f}"


class TestNTKRegression:
    def test_interpolates(self):
        X = np.linspace(-2, 2, 5)[:, None]
        y = np.cos(X[:, 0])
        assert np.allclose(ntk_regression_mean(X, X, y), y, atol=1e-5)

    def test_zero_targets(self):
        X = np.linspace(-2, 2, 5)[:, None]
        assert np.all(ntk_regression_mean([[0.1]], X, np.zeros(5)) == 0.0)

    def test_uses_bottleneck(self):
        X = np.linspace(-2, 2, 5)[:, None]
        y = np.cos(X[:, 0])
        a = ntk_regression_mean([[0.5]], X, y, H=1)
        b = NTKKernel(2).gram([[0.5]], X) @ np.linalg.solve(NTKKernel(2).gram(X), y)
        assert not np.allclose(a, b)
        assert np.allclose(ntk_regression_mean([[0.5]], X, y, H=2), b, atol=1e-5)
