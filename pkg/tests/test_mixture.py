import numpy as np
import pytest

from cure.mixture import (
    CsvFormatError,
    Dataset,
    MixtureParams,
    bayes_classifier,
    coordinate_fourth_moment,
    derive_seed,
    gaussian_radial,
    load_csv,
    make_two_point_radial,
    sample,
    save_csv,
)
from tests.conftest import desk_params


class TestTwoPointRadial:
    def test_moment_equations_exact(self):
        for d, kap in [(10, 1.0), (5, 1.0), (3, 0.5), (2, 3.0), (4, 1.0)]:
            law = make_two_point_radial(d, kap)
            assert law.radial_second_moment == pytest.approx(d, rel=1e-12)
            assert law.radial_fourth_moment == pytest.approx(
                (1 + kap / 3) * d * (d + 2), rel=1e-12
            )
            assert law.mz == pytest.approx(3 + kap, rel=1e-12)
            assert law.r1_sq > 0
            assert 0 < law.p_small < 1

    def test_symmetric_split_when_feasible(self):
        law = make_two_point_radial(10, 1.0)
        assert law.p_small == 0.5

    def test_adaptive_split_when_symmetric_infeasible(self):
        # d=2, kappa=3: p=1/2 would give r1^2 = 2 - sqrt(12) < 0
        law = make_two_point_radial(2, 3.0)
        assert law.p_small != 0.5
        assert law.r1_sq > 0
        assert law.mz == pytest.approx(6.0, rel=1e-12)

    def test_small_kurtosis_limit(self):
        # coordinate excess kurtosis -> 0 forces E R^4 -> d(d+2), i.e. the
        # radial law keeps variance 2d; the moments must still be matched
        law = make_two_point_radial(2, 1e-9)
        assert law.mz == pytest.approx(3.0, abs=1e-8)
        assert law.radial_second_moment == pytest.approx(2.0, rel=1e-12)
        assert law.radial_fourth_moment == pytest.approx(8.0, rel=1e-6)
        assert law.r1_sq > 0

    def test_rejects_invalid_parameters(self):
        with pytest.raises(ValueError):
            make_two_point_radial(10, 0.0)
        with pytest.raises(ValueError):
            make_two_point_radial(10, -1.0)
        with pytest.raises(ValueError):
            make_two_point_radial(1, 1.0)

    def test_monte_carlo_kurtosis(self):
        law = make_two_point_radial(6, 1.0)
        rng = np.random.default_rng(7)
        z1 = law.sample(1_000_000, rng)[:, 0]
        fourth = z1**4
        se = fourth.std(ddof=1) / np.sqrt(fourth.size)
        assert abs(fourth.mean() - 4.0) <= 3 * se


class TestGaussianRadial:
    def test_moments(self):
        law = gaussian_radial(5)
        assert law.mz == 3.0
        assert law.kappa_excess == 0.0
        assert not law.is_leptokurtic

    def test_samples_are_standard_normal(self):
        law = gaussian_radial(4)
        rng = np.random.default_rng(11)
        z = law.sample(200_000, rng)
        assert np.abs(z.mean(axis=0)).max() < 4 / np.sqrt(z.shape[0])
        cov = z.T @ z / z.shape[0]
        assert np.linalg.norm(cov - np.eye(4), 2) < 0.05


class TestFourthMoment:
    def test_gaussian_is_three(self):
        assert coordinate_fourth_moment(gaussian_radial(7)) == 3.0

    def test_two_point_matches_construction(self):
        assert coordinate_fourth_moment(make_two_point_radial(8, 1.0)) == pytest.approx(
            4.0, rel=1e-12
        )

    def test_monte_carlo_agreement(self):
        law = make_two_point_radial(4, 2.0)
        rng = np.random.default_rng(3)
        z1 = law.sample(1_000_000, rng)[:, 0]
        fourth = z1**4
        se = fourth.std(ddof=1) / np.sqrt(fourth.size)
        assert abs(fourth.mean() - coordinate_fourth_moment(law)) <= 3 * se


class TestSampler:
    def test_pure_noise_moments(self):
        d = 4
        params = MixtureParams(
            mu0=np.zeros(d),
            mu=np.zeros(d),
            sigma=np.eye(d),
            noise=make_two_point_radial(d, 1.0),
        )
        n = 100_000
        ds = sample(params, n, 0)
        assert np.linalg.norm(ds.x.mean(axis=0)) <= 4 * np.sqrt(d / n)
        cov = ds.x.T @ ds.x / n
        assert np.linalg.norm(cov - np.eye(d), 2) < 0.05

    def test_single_sample(self):
        ds = sample(desk_params(3), 1, 42)
        assert ds.x.shape == (1, 3)
        assert ds.labels[0] in (-1.0, 1.0)

    def test_pooled_covariance_identity(self):
        # E XX' = mu mu' + Sigma for the centered stretched instance
        d = 2
        params = MixtureParams(
            mu0=np.zeros(d),
            mu=np.array([1.0, 0.0]),
            sigma=np.diag([0.1, 10.0]),
            noise=make_two_point_radial(d, 1.0),
        )
        ds = sample(params, 100_000, 1)
        pooled = ds.x.T @ ds.x / ds.n
        np.testing.assert_allclose(pooled, np.diag([1.1, 10.0]), rtol=0.05, atol=0.05)

    def test_determinism(self):
        params = desk_params(5)
        a = sample(params, 500, 123)
        b = sample(params, 500, 123)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = sample(params, 500, 124)
        assert not np.array_equal(a.x, c.x)

    def test_label_balance(self):
        n = 10_000
        ds = sample(desk_params(4), n, 9)
        count = int((ds.labels == 1).sum())
        assert abs(count - n / 2) <= 4 * np.sqrt(n) / 2

    def test_spherical_symmetry_of_noise(self):
        law = make_two_point_radial(5, 1.0)
        rng = np.random.default_rng(13)
        z = law.sample(100_000, rng)
        assert np.abs(z.mean(axis=0)).max() <= 4 / np.sqrt(z.shape[0])
        cov = z.T @ z / z.shape[0]
        assert np.linalg.norm(cov - np.eye(5), 2) < 0.05

    def test_invalid_sigma_rejected(self):
        noise = make_two_point_radial(2, 1.0)
        with pytest.raises(ValueError):
            MixtureParams(
                mu0=np.zeros(2),
                mu=np.array([1.0, 0.0]),
                sigma=np.array([[1.0, 2.0], [2.0, 1.0]]),  # indefinite
                noise=noise,
            )
        with pytest.raises(ValueError):
            MixtureParams(
                mu0=np.zeros(2),
                mu=np.array([1.0, 0.0]),
                sigma=np.array([[1.0, 0.5], [0.4, 1.0]]),  # asymmetric
                noise=noise,
            )

    def test_n_validation(self):
        with pytest.raises(ValueError):
            sample(desk_params(2), 0, 0)


class TestBayesClassifier:
    def test_identity_covariance(self):
        d = 3
        params = MixtureParams(
            mu0=np.zeros(d),
            mu=np.eye(d)[0],
            sigma=np.eye(d),
            noise=make_two_point_radial(d, 1.0),
        )
        g = bayes_classifier(params)
        assert g.alpha == 0.0
        np.testing.assert_allclose(g.beta, np.eye(d)[0], atol=1e-14)

    def test_diagonal_inverse(self):
        params = MixtureParams(
            mu0=np.zeros(2),
            mu=np.array([1.0, 0.0]),
            sigma=np.diag([0.1, 10.0]),
            noise=make_two_point_radial(2, 1.0),
        )
        g = bayes_classifier(params)
        np.testing.assert_allclose(g.beta, [10.0, 0.0], atol=1e-12)
        assert g.alpha == pytest.approx(0.0, abs=1e-14)

    def test_shifted_instance(self):
        d = 3
        mu = np.array([0.5, -0.3, 0.2])
        params = MixtureParams(
            mu0=mu.copy(),
            mu=mu,
            sigma=np.eye(d),
            noise=make_two_point_radial(d, 1.0),
        )
        g = bayes_classifier(params)
        assert g.alpha == pytest.approx(-float(mu @ mu), rel=1e-12)

    def test_zero_mu_rejected(self):
        params = MixtureParams(
            mu0=np.zeros(2),
            mu=np.zeros(2),
            sigma=np.eye(2),
            noise=make_two_point_radial(2, 1.0),
        )
        with pytest.raises(ValueError):
            bayes_classifier(params)


class TestCsvRoundTrip:
    def test_lossless_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(
            x=rng.standard_normal((100, 5)) * 10.0 ** rng.integers(-8, 8, size=(100, 5)),
            labels=rng.choice([-1.0, 1.0], 100),
        )
        path = tmp_path / "data.csv"
        save_csv(ds, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.x, ds.x)
        np.testing.assert_array_equal(back.labels, ds.labels)

    def test_round_trip_without_labels(self, tmp_path):
        ds = Dataset(x=np.array([[1.5, -2.25], [0.1, 3.0]]))
        save_csv(ds, tmp_path / "x.csv")
        back = load_csv(tmp_path / "x.csv")
        assert back.labels is None
        np.testing.assert_array_equal(back.x, ds.x)

    def test_small_labeled_file(self, tmp_path):
        p = tmp_path / "two.csv"
        p.write_text("f0,f1,label\n0.5,1.0,1\n-0.5,2.0,-1\n")
        ds = load_csv(p)
        assert ds.n == 2 and ds.d == 2
        np.testing.assert_array_equal(ds.labels, [1.0, -1.0])

    def test_nan_cell_rejected_with_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,f1\n1.0,2.0\n3.0,NaN\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(p)
        assert "row 3" in str(err.value) and "f1" in str(err.value)

    def test_non_numeric_cell_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,f1\nx,2.0\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(p)
        assert "row 2" in str(err.value) and "f0" in str(err.value)

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,f1\n1.0,2.0\n3.0\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(p)
        assert "row 3" in str(err.value)

    def test_bad_label_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("f0,label\n1.0,2\n")
        with pytest.raises(CsvFormatError):
            load_csv(p)

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1.0,2.0\n")
        with pytest.raises(CsvFormatError):
            load_csv(p)

    def test_synthetic_provenance_survives_saving(self, tmp_path):
        ds = sample(desk_params(3), 10, 5)
        assert ds.meta["seed"] == 5
        save_csv(ds, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv")
        assert back.meta["params_hash"] == "external"


class TestSeedDerivation:
    def test_deterministic_and_distinct(self):
        assert derive_seed(0, 1) == derive_seed(0, 1)
        seen = {derive_seed(42, k) for k in range(100)}
        assert len(seen) == 100
        assert derive_seed(1, 2) != derive_seed(2, 1)
