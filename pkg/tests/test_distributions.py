import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from trigkernel import (
    PRINTED_GH,
    ConstantPhase,
    InputError,
    LinearPhase,
    MixtureFeatures,
    SMComponent,
    dgp_charfn_lower_bound,
    hermite_constants,
    laplace_marginal_cdf,
    laplace_marginal_pdf,
    linear_net_outputs,
    phase_shift_charfn_gh,
    phase_shift_charfn_integrand_mc,
    phase_shift_charfn_mc,
    phase_shift_charfn_numeric,
    phase_shift_forward,
    phase_shift_outputs,
    sample_shallow_net,
    shallow_marginal_pdf,
    shallow_outputs,
    zero_concentration_check,
    zero_concentration_from_outputs,
)
from trigkernel.networks import replica_rng


class TestLaplace:
    @pytest.mark.parametrize("s1,s2,xn", [(1.0, 1.0, 1.0), (0.5, 2.0, 3.0), (2.0, 0.3, 0.1)])
    def test_normalised(self, s1, s2, xn):
        total, _ = integrate.quad(laplace_marginal_pdf, -np.inf, np.inf, args=(s1, s2, xn))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_peak_value(self):
        assert laplace_marginal_pdf(0.0, 1.0, 2.0, 0.5) == pytest.approx(0.5)

    def test_cdf_is_integral_of_pdf(self):
        v, _ = integrate.quad(laplace_marginal_pdf, -np.inf, 0.7, args=(1.2, 0.8, 1.5))
        assert laplace_marginal_cdf(0.7, 1.2, 0.8, 1.5) == pytest.approx(v, abs=1e-10)

    @pytest.mark.parametrize("args", [(1.0, 1.0, 0.0), (0.0, 1.0, 1.0), (1.0, -1.0, 1.0)])
    def test_degenerate_inputs(self, args):
        with pytest.raises(InputError):
            laplace_marginal_pdf(0.0, *args)

    def test_linear_net_matches_law(self):
        x = np.array([0.6, -0.8])
        f = linear_net_outputs(x, 200_000, sigma1=1.5, sigma2=0.7, seed=2)
        ks = stats.kstest(f, lambda t: laplace_marginal_cdf(t, 1.5, 0.7, 1.0))
        assert ks.pvalue > 1e-3

    def test_histogram_bins(self):
        S = 400_000
        f = linear_net_outputs([0.6, 0.8], S, seed=3)
        edges = np.linspace(-5, 5, 41)
        counts, _ = np.histogram(f, edges)
        p = np.diff(laplace_marginal_cdf(edges, 1.0, 1.0, 1.0))
        assert np.all(np.abs(counts / S - p) <= 4 * np.sqrt(p * (1 - p) / S))

    def test_linear_net_deterministic(self):
        a = linear_net_outputs([1.0], 100, seed=5)
        assert np.array_equal(a, linear_net_outputs([1.0], 100, seed=5))


class TestShallowMarginal:
    def test_is_gaussian_density(self):
        assert shallow_marginal_pdf(0.0, 4.0) == pytest.approx(1 / np.sqrt(8 * np.pi))

    def test_rejects_bad_variance(self):
        with pytest.raises(InputError):
            shallow_marginal_pdf(0.0, 0.0)

    def test_feature_law_does_not_matter(self):
        mix = MixtureFeatures((SMComponent(0.3, (0.0,), (0.5,)), SMComponent(0.7, (3.0,), (2.0,))))
        a = shallow_outputs([[0.7]], 5, 100_000, seed=1)[:, 0] ** 2
        b = shallow_outputs([[0.7]], 5, 100_000, seed=2, features=mix)[:, 0] ** 2
        se = np.hypot(a.std(), b.std()) / np.sqrt(a.size)
        assert abs(a.mean() - b.mean()) <= 4 * se


class TestGaussHermite:
    def test_printed_constants_match_rule_to_two_places(self):
        exact = hermite_constants()
        for a, b in [(PRINTED_GH.lambda0, exact.lambda0), (PRINTED_GH.lambda1, exact.lambda1),
                     (PRINTED_GH.z1, exact.z1)]:
            assert round(b, 2) == a

    def test_zero_frequency_printed(self):
        assert phase_shift_charfn_gh(0.0, [0.7], np.pi / 4) == pytest.approx(1.78 / np.sqrt(np.pi), abs=1e-12)
        assert phase_shift_charfn_gh(0.0, [0.7], np.pi / 4) == pytest.approx(1.004, abs=5e-4)

    def test_zero_frequency_exact_constants(self):
        assert phase_shift_charfn_gh(0.0, [0.7], np.pi / 4, constants=hermite_constants()) == pytest.approx(1.0)

    def test_order_other_than_three_rejected(self):
        from trigkernel import GaussHermiteConstants

        with pytest.raises(InputError):
            GaussHermiteConstants(1.0, 1.0, 1.0, order=5)

    def test_mixed_feature_variances_rejected(self):
        with pytest.raises(InputError):
            phase_shift_charfn_gh(1.0, [0.5, 0.5], 0.3, feature_var=[1.0, 2.0])

    def test_no_shift_is_scaled_gaussian(self):
        g = phase_shift_charfn_gh(1.3, [0.7], 0.0)
        assert g == pytest.approx(1.78 / np.sqrt(np.pi) * np.exp(-0.5 * 1.69), rel=1e-12)

    def test_small_argument_accurate(self):
        q, x = 0.3, [0.2]
        exact = phase_shift_charfn_numeric(q, x, np.pi / 4)
        approx = phase_shift_charfn_gh(q, x, np.pi / 4, constants=hermite_constants())
        assert approx == pytest.approx(exact, abs=1e-3)


class TestPhaseShiftCharfn:
    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 3.0])
    def test_no_shift_is_gaussian(self, q):
        assert phase_shift_charfn_numeric(q, [0.7], 0.0) == pytest.approx(np.exp(-0.5 * q * q), abs=1e-14)

    def test_zero_input_is_gaussian(self):
        assert phase_shift_charfn_numeric(1.3, [0.0], np.pi / 4) == pytest.approx(np.exp(-0.5 * 1.69))

    def test_shift_half_pi_same_as_none(self):
        # sin(2 psi) vanishes at psi = pi/2 as well as 0
        assert phase_shift_charfn_numeric(1.0, [0.7], np.pi / 2) == pytest.approx(np.exp(-0.5), abs=1e-12)

    def test_bessel_limit(self):
        # huge feature variance makes 2a uniform mod 2 pi, so E exp(c sin 2a) -> I0(c)
        q, s2 = 1.5, 1.0
        c = 0.5 * q * q * s2
        v = phase_shift_charfn_numeric(q, [1.0], np.pi / 4, s2, feature_var=400.0)
        assert v == pytest.approx(np.exp(-0.5 * q * q) * np.i0(c), rel=1e-8)

    def test_reference_expression(self):
        # e^{-1/2} E exp(sin(2 omega x) / 2) at q = 1, x = 0.7, unit variances
        omega = np.random.default_rng(0).standard_normal(10**6)
        vals = np.exp(0.5 * np.sin(2 * omega * 0.7)) * np.exp(-0.5)
        exact = phase_shift_charfn_numeric(1.0, [0.7], np.pi / 4)
        assert abs(vals.mean() - exact) <= 4 * vals.std() / np.sqrt(vals.size)

    def test_small_q_correction_is_quartic(self):
        # phi - gauss ~ q^4 s^4 sin^2(2 psi) E[sin^2 2a] / 8 as q -> 0
        s_a2 = 0.49
        lead = 0.5 * (1 - np.exp(-8 * s_a2)) / 8
        for q in (0.05, 0.1):
            excess = phase_shift_charfn_numeric(q, [0.7], np.pi / 4) - np.exp(-0.5 * q * q)
            assert excess > 0
            assert excess / (q**4 * np.exp(-0.5 * q * q)) == pytest.approx(lead, rel=0.02)

    def test_dimension_reduction(self):
        a = phase_shift_charfn_numeric(1.0, [0.3, 0.4], np.pi / 4, feature_var=[2.0, 1.0])
        b = phase_shift_charfn_numeric(1.0, [np.sqrt(0.18 + 0.16)], np.pi / 4)
        assert a == pytest.approx(b, rel=1e-12)

    def test_linear_phase_evaluated_at_x(self):
        psi = LinearPhase((np.pi / 8,))
        a = phase_shift_charfn_numeric(1.0, [2.0], psi)
        assert a == pytest.approx(phase_shift_charfn_numeric(1.0, [2.0], np.pi / 4), rel=1e-14)

    @pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
    def test_integrand_mc_agrees(self, q):
        exact = phase_shift_charfn_numeric(q, [0.7], np.pi / 4)
        est = phase_shift_charfn_integrand_mc(q, [0.7], np.pi / 4, samples=200_000, seed=1)
        assert est.within(exact, n_se=4)

    @pytest.mark.parametrize("width", [1, 3])
    def test_network_mc_agrees(self, width):
        exact = phase_shift_charfn_numeric(1.0, [0.7], np.pi / 4, width=width)
        est = phase_shift_charfn_mc(1.0, [0.7], np.pi / 4, width=width, samples=200_000, seed=3)
        assert est.within(exact, n_se=4)

    def test_wide_net_tends_to_gaussian(self):
        vals = [phase_shift_charfn_numeric(2.0, [0.7], np.pi / 4, width=n) for n in (1, 10, 1000)]
        target = np.exp(-2.0)
        errs = [abs(v - target) for v in vals]
        assert errs[0] > errs[1] > errs[2]

    def test_invalid_width(self):
        with pytest.raises(InputError):
            phase_shift_charfn_numeric(1.0, [0.7], 0.2, width=0)


class TestPhaseShiftOutputs:
    def test_match_explicit_networks(self):
        # same draw order as phase_shift_outputs with batch 1: features, then weights
        x = np.array([0.4, -0.9])
        psi = ConstantPhase(0.6)
        fast = phase_shift_outputs(x, psi, 5, width=3, seed=11, batch=1)
        slow = []
        for b in range(5):
            rng = replica_rng(11, b)
            net = sample_shallow_net(3, 2, rng)
            slow.append(phase_shift_forward(net, psi, x))
        assert np.allclose(fast, slow, atol=1e-12)

    def test_variance_is_weight_variance(self):
        f = phase_shift_outputs([0.7], np.pi / 4, 200_000, width=2, weight_var=2.5, seed=4)
        assert f.var() == pytest.approx(2.5, rel=0.02)


class TestDeepBounds:
    def test_lower_bound_value(self):
        K = np.array([[1.0, 0.5], [0.5, 1.0]])
        assert dgp_charfn_lower_bound([1.0, -1.0], K) == pytest.approx(np.exp(-0.5))

    def test_lower_bound_shape_check(self):
        with pytest.raises(InputError):
            dgp_charfn_lower_bound([1.0, 2.0], np.eye(3))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_lower_bound_in_unit_interval(self, a, b):
        v = dgp_charfn_lower_bound([a, b], np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert 0.0 <= v <= 1.0


class TestZeroConcentration:
    def test_gaussian_outputs_match_reference(self):
        rng = np.random.default_rng(0)
        F = rng.standard_normal(400_000)
        zc = zero_concentration_from_outputs(F, [[1.0]], eps=0.05)
        assert zc.gaussian_density == pytest.approx(1 / np.sqrt(2 * np.pi))
        assert abs(zc.empirical - zc.gaussian_ref) <= 4 * zc.std_error
        assert zc.exceeds_reference()

    def test_box_reference_close_to_density(self):
        zc = zero_concentration_from_outputs(np.ones((10, 2)), np.eye(2), eps=0.01)
        assert zc.gaussian_ref == pytest.approx(zc.gaussian_density, rel=1e-3)

    def test_no_hits_not_reliable(self):
        zc = zero_concentration_from_outputs(np.full(50, 3.0), [[1.0]], eps=0.1)
        assert zc.hits == 0 and not zc.reliable and not zc.exceeds_reference()

    def test_scale_mixture_concentrates_more(self):
        # N(0, V) with random V of mean 1 has a higher peak than N(0, 1)
        rng = np.random.default_rng(1)
        F = rng.standard_normal(400_000) * np.sqrt(rng.exponential(1.0, 400_000))
        zc = zero_concentration_from_outputs(F, [[1.0]], eps=0.05)
        assert zc.empirical > zc.gaussian_ref + 4 * zc.std_error

    def test_single_input_deep_net_is_gaussian(self):
        # f(x) given the hidden layer is N(0, amp2), so one input shows no excess
        zc = zero_concentration_check([[0.3]], 64, 64, 200_000, eps=0.05, seed=5, batch=4096)
        assert abs(zc.empirical - zc.gaussian_ref) <= 4 * zc.std_error

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_bad_eps(self, eps):
        with pytest.raises(InputError):
            zero_concentration_from_outputs(np.zeros(5), [[1.0]], eps)
