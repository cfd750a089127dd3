import numpy as np
import pytest
from scipy.special import expit

from gpdistill.experiments.datasets import (
    classification_latent_truth,
    gen_classification_toy,
    gen_regression_toy,
    load_classification_csv,
    load_regression_csv,
    regression_truth,
    write_dataset_csv,
)


class TestRegressionToy:
    def test_input_grid_is_equidistant_on_0_10(self):
        data = gen_regression_toy(0)
        np.testing.assert_allclose(data.xs.ravel(), np.arange(10) * (10.0 / 9.0), atol=1e-12)
        assert data.xs.ravel()[0] == 0.0
        assert data.xs.ravel()[-1] == 10.0

    def test_noiseless_variant_is_exact_truth(self):
        data = gen_regression_toy(7, noiseless=True)
        x = data.xs.ravel()
        np.testing.assert_array_equal(data.ys, x * np.sin(x))

    def test_seed_determinism(self):
        a = gen_regression_toy(42)
        b = gen_regression_toy(42)
        np.testing.assert_array_equal(a.ys, b.ys)
        c = gen_regression_toy(43)
        assert not np.array_equal(a.ys, c.ys)

    def test_noise_is_unit_scale(self):
        # across many seeds the deviations from the truth are standard normal
        devs = np.concatenate(
            [gen_regression_toy(s).ys - regression_truth(gen_regression_toy(s).xs.ravel())
             for s in range(200)]
        )
        assert abs(np.mean(devs)) < 0.05
        assert abs(np.std(devs) - 1.0) < 0.05


class TestClassificationToy:
    def test_inputs_in_range(self):
        data = gen_classification_toy(3, n=200)
        assert np.all(data.xs >= 0.0) and np.all(data.xs <= 5.0)
        assert data.strictly_binary

    def test_seed_determinism(self):
        a = gen_classification_toy(5, n=50)
        b = gen_classification_toy(5, n=50)
        np.testing.assert_array_equal(a.xs, b.xs)
        np.testing.assert_array_equal(a.ys, b.ys)

    def test_label_mean_near_latent_extremum_matches_sigmoid(self):
        # g has a flat extremum at x = 1 (g(1) = 2), so labels binned near 1
        # estimate sigma(2) with negligible curvature bias
        data = gen_classification_toy(11, n=400_000)
        x = data.xs.ravel()
        mask = np.abs(x - 1.0) < 0.05
        assert mask.sum() > 5000
        assert abs(data.ys[mask].mean() - expit(2.0)) < 0.01

    def test_latent_truth_range(self):
        x = np.linspace(0, 5, 101)
        g = classification_latent_truth(x)
        assert np.min(g) == pytest.approx(-2.0, abs=1e-9)
        assert np.max(g) == pytest.approx(2.0, abs=1e-9)


class TestCsvRoundTrip:
    def test_regression_round_trip(self, tmp_path, rng):
        data = gen_regression_toy(1)
        path = tmp_path / "reg.csv"
        write_dataset_csv(path, data.xs, data.ys)
        loaded = load_regression_csv(path)
        np.testing.assert_array_equal(loaded.xs, data.xs)
        np.testing.assert_array_equal(loaded.ys, data.ys)

    def test_multidimensional_round_trip(self, tmp_path, rng):
        xs = rng.normal(size=(6, 3))
        ys = rng.normal(size=6)
        path = tmp_path / "d3.csv"
        write_dataset_csv(path, xs, ys)
        loaded = load_regression_csv(path)
        np.testing.assert_array_equal(loaded.xs, xs)
        assert (path.read_text().splitlines()[0]) == "x1,x2,x3,y"

    def test_classification_round_trip(self, tmp_path):
        data = gen_classification_toy(2, n=20)
        path = tmp_path / "cls.csv"
        write_dataset_csv(path, data.xs, data.ys)
        loaded = load_classification_csv(path)
        np.testing.assert_array_equal(loaded.ys, data.ys)
        assert loaded.strictly_binary

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            load_regression_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_regression_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "no_rows.csv"
        path.write_text("x1,y\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_regression_csv(path)
