import numpy as np
import pytest

from rtl.baselines import (BaselineFit, MethodConfig, MethodFactory, TransferTask, combine_inverse_variance,
                           fit_meta, fit_oracle, fit_pool, fit_stl, get_method)
from rtl.baselines.factory import create_methods
from rtl.baselines.meta import select_meta
from rtl.baselines.splines import SplineBasis, spline_basis_eval, spline_features, support_from_data
from rtl.dataset import Dataset
from rtl.errors import ConfigError, DimensionMismatch, InsufficientData, NonpositiveVariance
from rtl.estimator import fit_sources
from rtl.repnet import NetworkConfig
from rtl.simgen import generate_domain, make_design


def _cubic_domain(rng, n, beta, domain_id="domain", noise=0.0):
    """y = X beta + z1^3 - 0.5 z2^2 + noise; the confounding term lies in the spline span"""
    beta = np.asarray(beta, dtype=float)
    X = rng.uniform(-1, 1, size=(n, beta.size))
    Z = rng.uniform(-1, 1, size=(n, 2))
    y = X @ beta + Z[:, 0] ** 3 - 0.5 * Z[:, 1] ** 2 + noise * rng.standard_normal(n)
    return Dataset(y, X, Z, domain_id)


class TestSplines:
    @pytest.mark.parametrize("n_knots", [0, 1, 4])
    def test_partition_of_unity(self, rng, n_knots):
        basis = SplineBasis.equally_spaced(1, n_knots)
        for z in rng.uniform(-1, 1, size=20):
            assert spline_basis_eval(basis, [z]).sum() == pytest.approx(1.0, abs=1e-12)

    def test_continuous_at_interior_knot(self):
        basis = SplineBasis.equally_spaced(1, 1)
        left = spline_basis_eval(basis, [-1e-10])
        right = spline_basis_eval(basis, [1e-10])
        np.testing.assert_allclose(left, right, atol=1e-8)

    def test_no_knots_is_bernstein(self):
        u = (0.25 + 1.0) / 2.0
        expected = [(1 - u) ** 3, 3 * u * (1 - u) ** 2, 3 * u ** 2 * (1 - u), u ** 3]
        values = spline_basis_eval(SplineBasis.equally_spaced(1, 0), [0.25])
        np.testing.assert_allclose(values, expected, atol=1e-12)

    def test_feature_count_drops_redundant_columns(self, rng):
        basis = SplineBasis.equally_spaced(3, 2)
        features = spline_features(basis, rng.uniform(-1, 1, size=(10, 3)))
        assert features.shape == (10, 6 + 5 + 5)

    def test_rejects_unordered_knots(self):
        with pytest.raises(ConfigError):
            SplineBasis(((0.5, 0.1),), (-1.0,), (1.0,))

    def test_wrong_width(self):
        with pytest.raises(DimensionMismatch):
            spline_features(SplineBasis.equally_spaced(2, 0), np.zeros((3, 3)))

    def test_support(self):
        assert support_from_data(np.array([[0.5], [-0.5]])) == ((-1.0,), (1.0,))
        lower, upper = support_from_data(np.array([[0.0], [3.0]]))
        assert lower[0] < 0.0 and upper[0] > 3.0


class TestPool:
    def test_homogeneous_exact_recovery(self, rng):
        beta = [1.0, -2.0]
        domains = [_cubic_domain(rng, 80, beta, f"d{k}") for k in range(3)]
        validation = _cubic_domain(rng, 30, beta, "val")
        fit = fit_pool(domains, [0, 2], validation)
        np.testing.assert_allclose(fit.beta0, beta, atol=1e-8)
        assert fit.aux["knots"] in (0, 2)

    def test_averages_betas_on_shared_design(self, rng):
        X = rng.uniform(-1, 1, size=(40, 2))
        Z = rng.uniform(-1, 1, size=(40, 1))
        b1, b2 = np.array([1.0, 0.0]), np.array([3.0, -2.0])
        domains = [Dataset(X @ b1 + 1.0, X, Z), Dataset(X @ b2 + 1.0, X, Z)]
        fit = fit_pool(domains, use_spline=False)
        np.testing.assert_allclose(fit.beta0, (b1 + b2) / 2, atol=1e-10)

    def test_without_spline_is_linear_least_squares(self, rng):
        data = _cubic_domain(rng, 50, [0.5, 1.5])
        fit = fit_pool([data], use_spline=False)
        D = np.hstack([data.X, np.ones((data.n, 1))])
        expected = np.linalg.lstsq(D, data.y, rcond=None)[0]
        np.testing.assert_allclose(fit.beta0, expected[:2], atol=1e-8)
        np.testing.assert_allclose(fit.predict(data.X, data.Z), D @ expected, atol=1e-8)

    def test_internal_holdout_is_seeded(self, rng):
        domains = [_cubic_domain(rng, 60, [1.0, 1.0], f"d{k}") for k in range(2)]
        a = fit_pool(domains, [0, 1, 2], seed=4)
        b = fit_pool(domains, [0, 1, 2], seed=4)
        assert a.aux == b.aux

    def test_too_few_rows(self, rng):
        with pytest.raises(InsufficientData):
            fit_pool([_cubic_domain(rng, 6, [1.0, 1.0])], [4], _cubic_domain(rng, 5, [1.0, 1.0]))


class TestMeta:
    def test_equal_variances_give_mean(self):
        beta, weights = combine_inverse_variance([[1.0, 2.0], [3.0, 6.0]], [[0.5, 2.0], [0.5, 2.0]])
        np.testing.assert_allclose(beta, [2.0, 4.0])
        np.testing.assert_allclose(weights, 0.5)

    def test_single_domain_passes_through(self):
        beta, _ = combine_inverse_variance([[1.5, -0.5]], [[0.1, 0.2]])
        np.testing.assert_allclose(beta, [1.5, -0.5])

    def test_precision_weighting(self):
        beta, _ = combine_inverse_variance([[1.0], [3.0]], [[1.0], [1.0 / 3.0]])
        assert beta[0] == pytest.approx(2.5)

    def test_weights_sum_to_one(self, rng):
        _, weights = combine_inverse_variance(rng.standard_normal((5, 3)), rng.uniform(0.1, 2.0, size=(5, 3)))
        np.testing.assert_allclose(weights.sum(axis=0), 1.0)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.inf])
    def test_nonpositive_variance(self, bad):
        with pytest.raises(NonpositiveVariance):
            combine_inverse_variance([[1.0], [2.0]], [[1.0], [bad]])

    def test_fit_meta_recovers_shared_beta(self, rng):
        beta = [2.0, -1.0]
        domains = [_cubic_domain(rng, 60, beta, f"d{k}", noise=0.01) for k in range(3)]
        fit = fit_meta(domains, SplineBasis.equally_spaced(2, 0))
        np.testing.assert_allclose(fit.beta0, beta, atol=0.05)
        assert fit.aux["domains"] == ["d0", "d1", "d2"]

    def test_small_source_is_skipped(self, rng):
        domains = [_cubic_domain(rng, 60, [1.0, 1.0], "target", noise=0.01), _cubic_domain(rng, 4, [1.0, 1.0], "tiny")]
        fit = fit_meta(domains, SplineBasis.equally_spaced(2, 0))
        assert fit.aux["skipped"] == ["tiny"]

    def test_small_target_fails(self, rng):
        domains = [_cubic_domain(rng, 4, [1.0, 1.0], "target"), _cubic_domain(rng, 60, [1.0, 1.0])]
        with pytest.raises(InsufficientData):
            fit_meta(domains, SplineBasis.equally_spaced(2, 0))

    def test_select_records_knots(self, rng):
        domains = [_cubic_domain(rng, 80, [1.0, 0.0], f"d{k}", noise=0.05) for k in range(2)]
        fit = select_meta(domains, [0, 1], _cubic_domain(rng, 20, [1.0, 0.0]))
        assert fit.aux["knots"] in (0, 1)
        assert set(fit.aux["validation_mse"]) == {"0", "1"}


class TestNetworkComparators:
    def test_stl_is_single_domain_trainer(self, domain_factory, fast_train):
        target = domain_factory(60, [1.0, -1.0], noise=0.1)
        validation = domain_factory(20, [1.0, -1.0], noise=0.1)
        net = NetworkConfig(2, 2, depth=1, width=6, seed=5)
        stl = fit_stl(target, net, fast_train, validation)
        direct = fit_sources([target], net, fast_train, [validation])
        np.testing.assert_array_equal(stl.beta0, direct.betas[0])

    def test_oracle_noiseless_exact(self):
        design = make_design("Additive", d=2, q=3, r_true=2, seed=1, noise_sd=0.0)
        beta, gamma = np.array([0.7, -1.2]), np.array([1.0, 2.0])
        target = generate_domain(design, beta, gamma, 50, seed=2)
        fit = fit_oracle(target, design)
        np.testing.assert_allclose(fit.beta0, beta, atol=1e-8)
        np.testing.assert_allclose(fit.predict(target.X, target.Z), target.y, atol=1e-8)

    def test_oracle_needs_design(self, domain_factory):
        task = TransferTask([domain_factory(30, [1.0])], domain_factory(30, [1.0]))
        with pytest.raises(ConfigError):
            get_method("Oracle").fit(task)


class TestFactory:
    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            MethodFactory.create_method("Lasso")

    def test_placeholder_not_fitted(self):
        with pytest.raises(ConfigError):
            MethodFactory.create_method("MAP")

    def test_case_insensitive(self):
        assert get_method("meta").label == "Meta"

    def test_validate_methods(self):
        result = MethodFactory.validate_methods(["rtl", "Trans-Lasso", "Oracle", "bogus"], has_truth=False)
        assert result["methods"] == ["RTL"]
        assert result["placeholders"] == ["Trans-Lasso"]
        assert result["unknown"] == ["bogus"]
        assert len(result["warnings"]) == 1
        assert not result["valid"]

    def test_create_methods_skips_placeholders(self):
        methods = create_methods(["Pool", "MAP", "Meta"], {})
        assert [m.label for m in methods] == ["Pool", "Meta"]

    def test_info_lists_every_method(self):
        info = MethodFactory.get_method_info()
        assert set(info["computed_methods"]) == {"RTL", "STL", "Pool", "Meta", "Oracle"}

    def test_method_config_rejects_unknown_key(self):
        with pytest.raises(ConfigError):
            MethodConfig.from_dict("RTL", {"epochs": 5})

    def test_run_records_stats(self, rng):
        domains = [_cubic_domain(rng, 50, [1.0, 1.0], f"s{k}") for k in range(2)]
        method = get_method("Pool", MethodConfig("Pool", use_spline=False))
        result = method.run(TransferTask(domains, _cubic_domain(rng, 30, [1.0, 1.0], "target")))
        assert isinstance(result, BaselineFit)
        assert result.runtime >= 0.0
        stats = method.get_stats()
        assert stats["fits"] == 1 and stats["failures"] == 0
