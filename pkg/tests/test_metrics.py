import numpy as np
import pytest

from patchenhance.metrics import MetricReport, MetricRow, psnr, ssim

from conftest import random_image
from oracles import psnr_oracle, ssim_oracle


class TestPSNR:
    def test_identical_hits_cap(self, rng):
        img = random_image(rng, 32)
        assert psnr(img, img) == 99.0

    def test_closed_form_half_offset(self):
        a = np.zeros((32, 32, 3))
        b = np.full((32, 32, 3), 0.5)
        assert abs(psnr(a, b) - 6.0206) < 1e-3

    def test_symmetry(self, rng):
        a, b = random_image(rng, 32), random_image(rng, 32)
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            psnr(random_image(rng, 32), random_image(rng, 64))

    def test_matches_oracle(self, rng):
        for _ in range(20):
            a = rng.random((32, 32, 3))
            b = rng.random((32, 32, 3))
            assert abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-6


class TestSSIM:
    def test_self_similarity(self, rng):
        img = random_image(rng, 32)
        assert abs(ssim(img, img) - 1.0) < 1e-9

    def test_constant_images_closed_form(self):
        a = np.zeros((32, 32, 3))
        b = np.ones((32, 32, 3))
        c1 = 0.01**2
        assert abs(ssim(a, b) - c1 / (1 + c1)) < 1e-9

    def test_symmetry(self, rng):
        a, b = random_image(rng, 32), random_image(rng, 32)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_too_small_image(self, rng):
        with pytest.raises(ValueError):
            ssim(rng.random((8, 8, 3)), rng.random((8, 8, 3)))

    def test_matches_oracle(self, rng):
        for _ in range(5):
            a = rng.random((32, 32, 3))
            b = rng.random((32, 32, 3))
            assert abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6


class TestMetricReport:
    def test_means_equal_row_averages(self):
        rows = [MetricRow("a", 20.0, 0.8), MetricRow("b", 30.0, 0.9), MetricRow("c", 25.0, 0.7)]
        report = MetricReport(rows=rows)
        assert abs(report.mean_psnr - 25.0) < 1e-9
        assert abs(report.mean_ssim - 0.8) < 1e-9
        assert report.n_images == 3

    def test_csv_export(self, tmp_path):
        report = MetricReport(rows=[MetricRow("x", 20.0, 0.5)])
        path = str(tmp_path / "r.csv")
        report.write_csv(path)
        lines = open(path).read().splitlines()
        assert lines[0] == "name,psnr,ssim"
        assert lines[-1].startswith("mean,")
