import numpy as np
import pytest
import torch

from patchenhance.degrade import PairedSample
from patchenhance.enhance import EnhanceConfig, StyleIndex, enhance_image, enhance_patch, evaluate
from patchenhance.imagedata import DataError, ImageRecord, PatchRecord, patchify
from patchenhance.networks import NetConfig, init_model
from patchenhance.quality import QualityLabel, QualityScore
from patchenhance.synth import make_corpus, make_fundus

PATCH = 16


def tiny_bundle(with_style=True):
    cfg = NetConfig(
        patch_size=PATCH, content_channels=8, quality_dim=4, style_dim=4,
        residual_blocks=1, base_width=8,
    )
    bundle = init_model(cfg, seed=0)
    if with_style:
        bundle.mean_target_style = torch.zeros(4)
    return bundle


def some_patch(rng, row=0, col=0):
    return PatchRecord(
        pixels=rng.random((PATCH, PATCH, 3)).astype(np.float32),
        grid_row=row, grid_col=col, parent_id="img0",
    )


def score(label, p=0.9):
    return QualityScore(p_high=p, label=label, threshold_used=0.5)


class StubIndex:
    """StyleIndex stand-in with a fixed membership answer."""

    def __init__(self, member):
        self.member = member

    def is_target_style(self, patch):
        return self.member


class TestEnhancePatch:
    def test_low_patch_changes_and_keeps_shape(self, rng):
        patch = some_patch(rng)
        out = enhance_patch(patch, tiny_bundle(), score(QualityLabel.LOW))
        assert out.pixels.shape == patch.pixels.shape
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0
        assert not np.array_equal(out.pixels, patch.pixels)
        assert (out.grid_row, out.grid_col, out.parent_id) == (0, 0, "img0")

    def test_high_target_style_passes_through_bitwise(self, rng):
        patch = some_patch(rng)
        cfg = EnhanceConfig(patch_size=PATCH, pass_through_target=True)
        out = enhance_patch(patch, tiny_bundle(), score(QualityLabel.HIGH), cfg, StubIndex(True))
        assert out is patch

    def test_high_non_target_is_aligned(self, rng):
        patch = some_patch(rng)
        cfg = EnhanceConfig(patch_size=PATCH, style_align_all=True)
        out = enhance_patch(patch, tiny_bundle(), score(QualityLabel.HIGH), cfg, StubIndex(False))
        assert not np.array_equal(out.pixels, patch.pixels)

    def test_high_non_target_pass_through_when_align_disabled(self, rng):
        patch = some_patch(rng)
        cfg = EnhanceConfig(patch_size=PATCH, style_align_all=False)
        out = enhance_patch(patch, tiny_bundle(), score(QualityLabel.HIGH), cfg, StubIndex(False))
        assert out is patch

    def test_missing_mean_style_raises(self, rng):
        with pytest.raises(RuntimeError, match="mean target style"):
            enhance_patch(some_patch(rng), tiny_bundle(with_style=False), score(QualityLabel.LOW))

    def test_deterministic(self, rng):
        patch = some_patch(rng)
        b = tiny_bundle()
        a = enhance_patch(patch, b, score(QualityLabel.LOW))
        c = enhance_patch(patch, b, score(QualityLabel.LOW))
        assert np.array_equal(a.pixels, c.pixels)


class FakeQA:
    """batch_assess-compatible params are bypassed by monkeypatching."""


class TestEnhanceImage:
    def _image(self, rng, side=64):
        return ImageRecord(
            pixels=rng.random((side, side, 3)).astype(np.float32), source_path="x.png"
        )

    def test_patch_count_and_shape(self, rng, monkeypatch):
        import patchenhance.enhance as enh

        calls = []
        real = enh.enhance_patch

        def counting(patch, bundle, s, config=None, style_index=None):
            calls.append(1)
            return real(patch, bundle, s, config, style_index)

        monkeypatch.setattr(enh, "enhance_patch", counting)
        monkeypatch.setattr(
            enh.qa, "batch_assess",
            lambda patches, params, thr: [score(QualityLabel.LOW)] * len(patches),
        )
        image = self._image(rng, side=4 * PATCH)
        out = enh.enhance_image(image, tiny_bundle(), FakeQA(), EnhanceConfig(patch_size=PATCH))
        # a 4x4 grid of patches -> 16 per-patch calls
        assert len(calls) == 16
        assert out.pixels.shape == image.pixels.shape
        assert out.source_path == "x.png"

    def test_all_high_pass_through_is_identity(self, rng, monkeypatch):
        import patchenhance.enhance as enh

        monkeypatch.setattr(
            enh.qa, "batch_assess",
            lambda patches, params, thr: [score(QualityLabel.HIGH)] * len(patches),
        )
        image = self._image(rng, side=2 * PATCH)
        cfg = EnhanceConfig(patch_size=PATCH, style_align_all=False)
        out = enh.enhance_image(image, tiny_bundle(), FakeQA(), cfg, StubIndex(True))
        assert np.array_equal(out.pixels, image.pixels)


class TestEvaluate:
    def test_identity_pipeline_scores_perfect(self, rng, monkeypatch):
        import patchenhance.enhance as enh

        monkeypatch.setattr(
            enh.qa, "batch_assess",
            lambda patches, params, thr: [score(QualityLabel.HIGH)] * len(patches),
        )
        img = ImageRecord(
            pixels=rng.random((2 * PATCH, 2 * PATCH, 3)).astype(np.float32),
            source_path="a.png",
        )
        pairs = [PairedSample(clean=img, degraded=img, spec=None, seed=0)]
        cfg = EnhanceConfig(patch_size=PATCH, style_align_all=False)
        report = enh.evaluate(pairs, tiny_bundle(), FakeQA(), cfg, StubIndex(True))
        assert report.mean_psnr == pytest.approx(99.0)
        assert report.mean_ssim == pytest.approx(1.0)

    def test_empty_pairs_rejected(self):
        with pytest.raises(DataError):
            evaluate([], tiny_bundle(), FakeQA())


class TestSynth:
    def test_fundus_shape_range_determinism(self):
        a = make_fundus(size=64, seed=5, style=0)
        b = make_fundus(size=64, seed=5, style=0)
        assert a.pixels.shape == (64, 64, 3)
        assert a.pixels.min() >= 0.0 and a.pixels.max() <= 1.0
        assert np.array_equal(a.pixels, b.pixels)

    def test_styles_differ(self):
        a = make_fundus(size=64, seed=5, style=0)
        b = make_fundus(size=64, seed=5, style=1)
        assert not np.array_equal(a.pixels, b.pixels)
        # style 1 is globally darker
        assert b.pixels.mean() < a.pixels.mean()

    def test_corners_are_background(self):
        img = make_fundus(size=64, seed=0).pixels
        assert img[0, 0].max() <= 0.05 and img[-1, -1].max() <= 0.05

    def test_corpus_written(self, tmp_path):
        paths = make_corpus(str(tmp_path), count=4, size=32, seed=0)
        assert len(paths) == 4
        import os

        assert all(os.path.exists(p) for p in paths)
