"""Acceptance gate: one test per release criterion, each emitting a
single machine-greppable [PASS]/[FAIL] line with the measured numbers.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import json
import math
import os
import time

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from conftest import random_image
from oracles import psnr_oracle, ssim_oracle
from patchenhance import losses as L
from patchenhance.cli import main as cli_main
from patchenhance.imagedata import ImageRecord, patchify, reassemble
from patchenhance.metrics import psnr, ssim
from patchenhance.networks import NetConfig, init_model
from patchenhance.pipeline import ExperimentConfig, run_experiment
from patchenhance.quality import QAConfig, batch_assess, train_quality_classifier
from patchenhance.stylecluster import StyleEmbedding, cluster_styles, kmeans
from patchenhance.synth import make_fundus
from patchenhance.trainer import forward_cycles

torch.set_num_threads(os.cpu_count() or 8)


def verdict(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(f"\n{line}")
    assert ok, line


# --- criterion 1: metric oracle equivalence -------------------------------

def test_metric_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(0)
    max_dpsnr = max_dssim = 0.0
    for _ in range(100):
        a, b = random_image(rng, 32), random_image(rng, 32)
        max_dpsnr = max(max_dpsnr, abs(psnr(a, b) - psnr_oracle(a.pixels, b.pixels)))
        max_dssim = max(max_dssim, abs(ssim(a, b) - ssim_oracle(a.pixels, b.pixels)))
    a = random_image(rng, 32)
    cap_ok = psnr(a, a) == 99.0 and ssim(a, a) == pytest.approx(1.0, abs=1e-9)
    zeros = ImageRecord(pixels=np.zeros((32, 32, 3), dtype=np.float32))
    halves = ImageRecord(pixels=np.full((32, 32, 3), 0.5, dtype=np.float32))
    closed_ok = abs(psnr(zeros, halves) - 6.0206) < 5e-5
    elapsed = time.time() - start
    ok = max_dpsnr <= 1e-6 and max_dssim <= 1e-6 and cap_ok and closed_ok and elapsed < 10
    verdict(
        "metric-oracle-equivalence", ok,
        f"|dPSNR|max={max_dpsnr:.2e}, |dSSIM|max={max_dssim:.2e}, "
        f"cap/closed-form ok={cap_ok and closed_ok}, {elapsed:.1f}s",
    )


# --- criterion 2: loss identity suite --------------------------------------

def test_loss_identity_suite():
    start = time.time()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        parts = rng.uniform(0, 10, size=5)
        w = L.LossWeights(rng.uniform(0, 1), rng.uniform(0, 1))
        rep = L.total_loss(*parts, w)
        want = parts[:3].sum() + w.lambda1 * parts[3] + w.lambda2 * parts[4]
        worst = max(worst, abs(rep.total - want), abs(rep.l_s - parts[:3].sum()))
    worked = L.total_loss(1.0, 2.0, 3.0, 10.0, 20.0, L.LossWeights(0.1, 0.1))
    worked_ok = abs(worked.l_s - 6.0) < 1e-9 and abs(worked.total - 9.0) < 1e-9
    x = torch.rand(2, 3, 16, 16)
    zero_ok = (
        L.recon_l1(x, x.clone()).item() == 0.0
        and L.quality_recon_loss(x, x, x, x).item() == 0.0
        and L.style_recon_loss(x, x, x, x).item() == 0.0
        and L.cross_consistency_loss(x, x.clone()).item() == 0.0
    )
    z = torch.zeros(1, 3, 8, 8)
    offset_ok = (
        abs(L.recon_l1(z, z + 0.5).item() - 0.5) < 1e-7
        and abs(L.quality_recon_loss(z, z + 0.25, z, z + 0.1).item() - 0.35) < 1e-6
    )
    elapsed = time.time() - start
    ok = worst <= 1e-6 and worked_ok and zero_ok and offset_ok and elapsed < 5
    verdict(
        "loss-identity-suite", ok,
        f"decomposition err={worst:.2e}, worked 6->9 ok={worked_ok}, "
        f"zero/offset ok={zero_ok and offset_ok}, {elapsed:.1f}s",
    )


# --- criterion 3: gradient checks -------------------------------------------

def test_gradient_checks():
    from test_gradients import _check_gradients  # reuse the harness

    start = time.time()
    torch.manual_seed(0)
    cfg = NetConfig(
        patch_size=8, content_channels=4, quality_dim=2, style_dim=2,
        residual_blocks=1, base_width=4,
    )
    bundle = init_model(cfg, seed=0)
    for m in bundle.modules().values():
        m.double()
    g = torch.Generator().manual_seed(1)
    x = tuple(torch.rand(2, 3, 8, 8, generator=g, dtype=torch.float64) for _ in range(3))
    for term in ("l_q", "l_t", "l_c", "adv_img"):
        _check_gradients(bundle, x, term, rtol=1e-3)
    elapsed = time.time() - start
    ok = elapsed < 120
    verdict(
        "gradient-checks", ok,
        f"l_q/l_t/l_c/adv_img finite differences within 1e-3 rel, {elapsed:.1f}s",
    )


# --- criterion 4: cycle wiring ----------------------------------------------

def test_cycle_wiring():
    from test_trainer import IdentityBundleStub, domain_tensors, tiny_net_config

    x_low, x_src, x_tgt = domain_tensors(4)
    batch = forward_cycles(IdentityBundleStub(), x_low, x_src, x_tgt)
    identity_ok = torch.equal(batch.x_low_hat, x_low) and torch.equal(batch.x_src_hat1, x_src)
    real = forward_cycles(init_model(tiny_net_config(), seed=0), x_low, x_src, x_tgt)
    names = (
        "x_low2high", "x_high2low", "x_src2tgt", "x_tgt2src",
        "x_low_hat", "x_src_hat1", "x_src_hat2", "x_tgt_hat",
    )
    closure_ok = all(getattr(real, n).shape == x_low.shape for n in names)
    ok = identity_ok and closure_ok
    verdict(
        "cycle-wiring", ok,
        f"identity-stub reconstruction bitwise={identity_ok}, "
        f"shape closure 8/8={closure_ok}",
    )


# --- criterion 5: clustering + target selection -----------------------------

def test_clustering_and_target_selection():
    rng = np.random.default_rng(3)
    big = rng.normal(0.0, 0.05, size=(10, 4)) + np.array([2.0, 0, 0, 0])
    small = rng.normal(0.0, 0.05, size=(5, 4)) + np.array([-2.0, 0, 0, 0])
    points = np.vstack([big, small])
    labels, centroids, inertia = kmeans(points, k=2, seed=0)
    brute = np.array([
        int(((centroids - p[None, :]) ** 2).sum(axis=1).argmin()) for p in points
    ])
    assign_ok = np.array_equal(labels, brute)
    monotone_ok = all(b <= a + 1e-12 for a, b in zip(inertia, inertia[1:]))
    embeddings = [
        StyleEmbedding(vector=p.astype(np.float64), patch_ref=f"p{i}")
        for i, p in enumerate(points)
    ]
    domains = cluster_styles(embeddings, k=2, seed=0)
    target_is_big = domains.cluster_sizes()[domains.target_id] == 10
    ok = assign_ok and monotone_ok and target_is_big
    verdict(
        "clustering-target-selection", ok,
        f"nearest-centroid match={assign_ok}, inertia non-increasing={monotone_ok}, "
        f"target is 10-point blob={target_is_big}",
    )


# --- criterion 6: patch round-trip -------------------------------------------

def test_patch_round_trip():
    rng = np.random.default_rng(4)
    img = random_image(rng, 512)
    all_ok, counts = True, {}
    for size in (32, 64, 128, 256):
        grid = patchify(img, size)
        counts[size] = len(grid.patches)
        back = reassemble(grid)
        all_ok = all_ok and np.array_equal(back.pixels, img.pixels)
    ok = all_ok and counts[128] == 16
    verdict(
        "patch-round-trip", ok,
        f"bitwise identity for sizes 32/64/128/256={all_ok}, "
        f"count at 128={counts[128]} (want 16)",
    )


# --- criterion 7: quality classifier -----------------------------------------

def test_quality_classifier():
    from patchenhance import kernels

    start = time.time()
    rng = np.random.default_rng(5)
    patches, labels = [], []
    for i in range(200):
        img = make_fundus(size=64, seed=1000 + i, style=i % 2)
        clean = img.pixels[16:48, 16:48, :]
        patches.append(clean)
        labels.append(1)
        patches.append(kernels.gaussian_blur(clean, sigma=4.0).astype(np.float32))
        labels.append(0)
    idx = rng.permutation(len(patches))
    split = int(0.8 * len(patches))
    tr_idx, te_idx = idx[:split], idx[split:]
    params = train_quality_classifier(
        [patches[i] for i in tr_idx],
        [labels[i] for i in tr_idx],
        QAConfig(input_size=32, epochs=40, seed=0),
    )
    scores = batch_assess([patches[i] for i in te_idx], params)
    preds = [1 if s.label.name == "HIGH" else 0 for s in scores]
    acc = float(np.mean([p == labels[i] for p, i in zip(preds, te_idx)]))
    elapsed = time.time() - start
    ok = acc >= 0.95 and elapsed < 120
    verdict(
        "quality-classifier", ok,
        f"held-out accuracy={acc:.3f} (want >=0.95) on 400 patches, {elapsed:.1f}s",
    )


# --- criterion 8: desk-scale end-to-end --------------------------------------

E2E_ITERS = int(os.environ.get("PATCHENHANCE_E2E_ITERS", "3000"))


@pytest.fixture(scope="module")
def desk_corpus():
    return [make_fundus(size=128, seed=i, style=i % 2) for i in range(200)]


def test_desk_scale_end_to_end(desk_corpus):
    start = time.time()
    cfg = ExperimentConfig(train_iters=E2E_ITERS, seed=0)
    result = run_experiment(desk_corpus, cfg)
    elapsed = time.time() - start
    ok = result.psnr_gain >= 1.0 and result.ssim_gain >= 0.02 and elapsed < 1800
    verdict(
        "desk-scale-e2e", ok,
        f"PSNR {result.baseline.mean_psnr:.2f}->{result.enhanced.mean_psnr:.2f} "
        f"(+{result.psnr_gain:.2f} dB, want >=1.0), SSIM "
        f"{result.baseline.mean_ssim:.3f}->{result.enhanced.mean_ssim:.3f} "
        f"(+{result.ssim_gain:.3f}, want >=0.02), {elapsed:.0f}s",
    )


# --- criterion 9: determinism -------------------------------------------------

def test_determinism(tmp_path):
    images = [make_fundus(size=64, seed=i, style=i % 2) for i in range(12)]
    cfg = ExperimentConfig(
        patch_size=16, k=2, train_iters=40, batch_size=8, holdout=2,
        qa_epochs=4, ae_epochs=4, seed=0,
    )
    runs = []
    for run in range(2):
        log = str(tmp_path / f"log{run}.tsv")
        runs.append((run_experiment(images, cfg, log_path=log), open(log).read()))
    (r0, log0), (r1, log1) = runs
    logs_ok = log0 == log1
    params_ok = all(
        torch.equal(p, q)
        for name, m in r0.bundle.modules().items()
        for p, q in zip(m.parameters(), getattr(r1.bundle, name).parameters())
    )
    metrics_ok = (
        r0.enhanced.mean_psnr == r1.enhanced.mean_psnr
        and r0.enhanced.mean_ssim == r1.enhanced.mean_ssim
    )
    ok = logs_ok and params_ok and metrics_ok
    verdict(
        "determinism", ok,
        f"identical loss logs={logs_ok}, identical final parameters={params_ok}, "
        f"identical held-out metrics={metrics_ok}",
    )


# --- criterion 10: ablation hooks ----------------------------------------------

def test_ablation_hooks(tmp_path):
    runner = CliRunner()
    corpus = str(tmp_path / "corpus")
    res = runner.invoke(
        cli_main, ["make-corpus", "--out", corpus, "--count", "8", "--size", "64"],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    tables = {}
    for knob, values in (("k", "3,5,7"), ("patch-size", "16,32")):
        report = str(tmp_path / f"sweep_{knob}.tsv")
        res = runner.invoke(
            cli_main,
            ["sweep", "--corpus", corpus, "--size", "64", "--patch-size", "16",
             "--knob", knob, "--values", values, "--iters", "3", "--holdout", "2",
             "--report", report],
            catch_exceptions=False,
        )
        assert res.exit_code == 0, res.output
        lines = open(report).read().splitlines()
        tables[knob] = lines
    k_ok = len(tables["k"]) == 4 and tables["k"][0].split("\t")[0] == "k"
    p_ok = len(tables["patch-size"]) == 3
    cols_ok = all(len(l.split("\t")) == 5 for t in tables.values() for l in t)
    ok = k_ok and p_ok and cols_ok
    verdict(
        "ablation-hooks", ok,
        f"k-sweep rows={len(tables['k']) - 1}, patch-size-sweep rows="
        f"{len(tables['patch-size']) - 1}, 5-column metric tables={cols_ok}",
    )
