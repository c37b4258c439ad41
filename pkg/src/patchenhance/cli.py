"""Command-line entry points for the enhancement pipeline."""

from __future__ import annotations

import json
import os

import click
import numpy as np
import torch

from . import quality as qa
from . import stylecluster as sc
from . import trainer as tr
from .degrade import DegradationSpec, degrade as degrade_fn
from .enhance import EnhanceConfig, StyleIndex, enhance_image, evaluate
from .imagedata import (
    build_manifest,
    load_image,
    load_manifest,
    patchify,
    save_image,
    save_manifest,
)
from .losses import LossWeights
from .metrics import MetricReport, MetricRow, psnr, ssim
from .networks import NetConfig, load_bundle, save_bundle
from .pipeline import (
    ExperimentConfig,
    default_degradation,
    load_corpus,
    run_experiment,
)
from .synth import make_corpus
from .trainer import TrainConfig


@click.group()
def main():
    """Reference-free patch-domain image quality enhancement."""


@main.command("make-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--count", default=200, show_default=True)
@click.option("--size", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
def make_corpus_cmd(out_dir, count, size, seed):
    """Generate a synthetic fundus-like clean corpus."""
    paths = make_corpus(out_dir, count, size=size, seed=seed)
    click.echo(f"wrote {len(paths)} images to {out_dir}")


@main.command("degrade")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=512, show_default=True, help="square resize applied on load")
def degrade_cmd(in_dir, out_dir, spec_path, seed, size):
    """Write degraded copies plus a clean<->degraded pairing manifest."""
    if spec_path:
        with open(spec_path) as fh:
            spec = DegradationSpec.from_json(fh.read())
    else:
        spec = default_degradation()
    os.makedirs(out_dir, exist_ok=True)
    images = load_corpus(in_dir, size)
    lines = []
    for i, img in enumerate(images):
        pair = degrade_fn(img, spec, seed=seed + i)
        name = os.path.basename(img.source_path)
        out_path = os.path.join(out_dir, name)
        save_image(pair.degraded, out_path)
        lines.append(f"{img.source_path}\t{out_path}")
    with open(os.path.join(out_dir, "pairs.tsv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "spec.json"), "w") as fh:
        fh.write(spec.to_json())
    click.echo(f"degraded {len(images)} images into {out_dir}")


@main.command("build-manifest")
@click.option("--root", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--fractions", default="0.8,0.1,0.1", show_default=True)
@click.option("--seed", default=0, show_default=True)
def build_manifest_cmd(root, out_path, fractions, seed):
    """Deterministically split an image directory into train/val/test."""
    fr = tuple(float(x) for x in fractions.split(","))
    manifest = build_manifest(root, fr, seed)
    save_manifest(manifest, out_path)
    click.echo(f"wrote manifest with {len(manifest.entries)} entries to {out_path}")


@main.command("train-qa")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--patch-size", default=128, show_default=True)
@click.option("--size", default=512, show_default=True)
@click.option("--epochs", default=6, show_default=True)
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="degradation spec used to synthesize LOW patches")
def train_qa_cmd(manifest_path, out_path, seed, patch_size, size, epochs, spec_path):
    """Train the patch quality classifier.

    HIGH patches come from the manifest's train images; LOW patches are
    degraded copies synthesized per patch.
    """
    from .degrade import degrade as deg
    from .imagedata import ImageRecord

    if spec_path:
        with open(spec_path) as fh:
            spec = DegradationSpec.from_json(fh.read())
    else:
        spec = default_degradation()
    manifest = load_manifest(manifest_path)
    patches, labels = [], []
    for path in manifest.paths("train"):
        img = load_image(path, size)
        for p in patchify(img, patch_size).patches:
            patches.append(p.pixels)
            labels.append(1)
            rec = ImageRecord(pixels=p.pixels, source_path=path)
            patches.append(deg(rec, spec, seed=seed + len(patches)).degraded.pixels)
            labels.append(0)
    params = qa.train_quality_classifier(
        patches, labels, qa.QAConfig(input_size=patch_size, epochs=epochs, seed=seed)
    )
    qa.save_params(params, out_path)
    click.echo(f"trained on {len(patches)} patches; params -> {out_path}")


@main.command("cluster")
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True))
@click.option("--qa", "qa_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=7, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patch-size", default=128, show_default=True)
@click.option("--size", default=512, show_default=True)
@click.option("--embedding-dim", default=64, show_default=True)
@click.option("--epochs", default=8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--ae-out", "ae_path", required=True, type=click.Path())
@click.option("--embeddings-out", "emb_path", type=click.Path(), default=None)
def cluster_cmd(image_dir, qa_path, k, seed, patch_size, size, embedding_dim, epochs,
                out_path, ae_path, emb_path):
    """Embed high-quality patches, k-means them, select the target style domain."""
    qa_params = qa.load_params(qa_path)
    images = load_corpus(image_dir, size)
    patches = [p for img in images for p in patchify(img, patch_size).patches]
    part = qa.partition(patches, qa_params)
    if not part.high:
        raise click.ClickException("no high-quality patches found")
    ae_params = sc.train_style_autoencoder(
        part.high,
        sc.AEConfig(patch_size=patch_size, embedding_dim=embedding_dim, epochs=epochs, seed=seed),
    )
    embeddings = sc.embed_batch(part.high, ae_params)
    domains = sc.cluster_styles(embeddings, k, seed=seed)
    with open(out_path, "w") as fh:
        fh.write(domains.to_json())
    sc.save_ae(ae_params, ae_path)
    if emb_path:
        arr = np.stack([e.vector for e in embeddings]).astype(np.float32)
        with open(emb_path, "wb") as fh:
            fh.write(f"{arr.shape[0]} {arr.shape[1]}\n".encode())
            fh.write(arr.tobytes())
    click.echo(
        f"clustered {len(embeddings)} high patches into k={k}; "
        f"target domain {domains.target_id} (sizes {domains.cluster_sizes()})"
    )


@main.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--qa", "qa_path", required=True, type=click.Path(exists=True))
@click.option("--domains", "domains_path", required=True, type=click.Path(exists=True))
@click.option("--ae", "ae_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "ckpt_dir", required=True, type=click.Path())
@click.option("--size", default=512, show_default=True)
@click.option("--resume", "resume_path", type=click.Path(exists=True), default=None)
def train_cmd(manifest_path, qa_path, domains_path, ae_path, config_path, ckpt_dir, size, resume_path):
    """Train the disentangled translators on the manifest's train split."""
    cfg_dict = {}
    if config_path:
        with open(config_path) as fh:
            cfg_dict = json.load(fh)
    net_cfg = NetConfig(**cfg_dict.get("net", {}))
    tcfg_fields = cfg_dict.get("train", {})
    weights = LossWeights(**tcfg_fields.pop("weights", {}))
    train_cfg = TrainConfig(weights=weights, **tcfg_fields)
    train_cfg.patch_size = net_cfg.patch_size

    qa_params = qa.load_params(qa_path)
    ae_params = sc.load_ae(ae_path)
    with open(domains_path) as fh:
        domains = sc.StyleDomains.from_json(fh.read())

    manifest = load_manifest(manifest_path)
    patches = []
    for path in manifest.paths("train"):
        patches.extend(patchify(load_image(path, size), net_cfg.patch_size).patches)
    part = qa.partition(patches, qa_params)
    embeddings = sc.embed_batch(part.high, ae_params)
    tgt, src = [], []
    for patch, emb in zip(part.high, embeddings):
        d2 = ((domains.centroids - emb.vector[None, :]) ** 2).sum(axis=1)
        (tgt if int(d2.argmin()) == domains.target_id else src).append(patch)
    if not (part.low and src and tgt):
        raise click.ClickException(
            f"degenerate domains: low={len(part.low)} src={len(src)} tgt={len(tgt)}"
        )

    def to_tensor(ps):
        return torch.from_numpy(np.stack([p.pixels for p in ps]).astype(np.float32)).permute(0, 3, 1, 2)

    os.makedirs(ckpt_dir, exist_ok=True)
    x_tgt = to_tensor(tgt)
    bundle = tr.train(
        to_tensor(part.low), to_tensor(src), x_tgt, net_cfg, train_cfg,
        checkpoint_dir=ckpt_dir,
        log_path=os.path.join(ckpt_dir, "loss_log.tsv"),
        resume_from=resume_path,
    )
    tr.compute_target_style_code(bundle, x_tgt)
    save_bundle(bundle, os.path.join(ckpt_dir, "model.ckpt"), iteration=train_cfg.max_iters,
                seed=train_cfg.seed)
    click.echo(f"trained {train_cfg.max_iters} iterations; checkpoints in {ckpt_dir}")


@main.command("enhance")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--qa", "qa_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--domains", "domains_path", type=click.Path(exists=True), default=None)
@click.option("--ae", "ae_path", type=click.Path(exists=True), default=None)
@click.option("--size", default=512, show_default=True)
@click.option("--patch-size", default=None, type=int)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--style-align-all/--low-only", default=True, show_default=True)
def enhance_cmd(in_dir, ckpt_path, qa_path, out_dir, domains_path, ae_path, size,
                patch_size, threshold, style_align_all):
    """Enhance every image in a directory and write PNGs."""
    bundle, _ = load_bundle(ckpt_path)
    qa_params = qa.load_params(qa_path)
    style_index = None
    if domains_path and ae_path:
        with open(domains_path) as fh:
            domains = sc.StyleDomains.from_json(fh.read())
        style_index = StyleIndex.from_domains(sc.load_ae(ae_path), domains)
    cfg = EnhanceConfig(
        patch_size=patch_size or bundle.config.patch_size,
        quality_threshold=threshold,
        style_align_all=style_align_all,
    )
    os.makedirs(out_dir, exist_ok=True)
    images = load_corpus(in_dir, size)
    for img in images:
        out = enhance_image(img, bundle, qa_params, cfg, style_index)
        save_image(out, os.path.join(out_dir, os.path.basename(img.source_path)))
    click.echo(f"enhanced {len(images)} images into {out_dir}")


@main.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="TSV of clean<->degraded paths (from `degrade`)")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--qa", "qa_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--size", default=512, show_default=True)
@click.option("--patch-size", default=None, type=int)
@click.option("--panels", "panel_dir", type=click.Path(), default=None,
              help="optional per-image clean|degraded|enhanced side-by-side PNGs")
def eval_cmd(pairs_path, ckpt_path, qa_path, report_path, size, patch_size, panel_dir):
    """Enhance degraded images and report PSNR/SSIM against the clean originals."""
    from .degrade import PairedSample
    from .imagedata import ImageRecord

    bundle, _ = load_bundle(ckpt_path)
    qa_params = qa.load_params(qa_path)
    cfg = EnhanceConfig(patch_size=patch_size or bundle.config.patch_size)
    pairs = []
    with open(pairs_path) as fh:
        for line in fh:
            if not line.strip():
                continue
            clean_path, degraded_path = line.rstrip("\n").split("\t")
            pairs.append(
                PairedSample(
                    clean=load_image(clean_path, size),
                    degraded=load_image(degraded_path, size),
                    spec=default_degradation(),
                    seed=0,
                )
            )
    report = evaluate(pairs, bundle, qa_params, cfg)
    report.write_csv(report_path)
    if panel_dir:
        os.makedirs(panel_dir, exist_ok=True)
        for pair, row in zip(pairs, report.rows):
            out = enhance_image(pair.degraded, bundle, qa_params, cfg)
            panel = np.concatenate([pair.clean.pixels, pair.degraded.pixels, out.pixels], axis=1)
            save_image(ImageRecord(pixels=panel), os.path.join(
                panel_dir, os.path.basename(pair.clean.source_path) or f"{row.name}.png"))
    click.echo(f"mean PSNR {report.mean_psnr:.3f} dB, mean SSIM {report.mean_ssim:.4f} "
               f"over {report.n_images} pairs -> {report_path}")


@main.command("e2e")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--size", default=128, show_default=True)
@click.option("--patch-size", default=32, show_default=True)
@click.option("--k", default=3, show_default=True)
@click.option("--iters", default=3000, show_default=True)
@click.option("--holdout", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def e2e_cmd(corpus_dir, size, patch_size, k, iters, holdout, seed, out_dir):
    """Desk-scale end-to-end run: degrade, build domains, train, evaluate."""
    images = load_corpus(corpus_dir, size)
    cfg = ExperimentConfig(patch_size=patch_size, k=k, seed=seed, train_iters=iters, holdout=holdout)
    log_path = os.path.join(out_dir, "loss_log.tsv") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    result = run_experiment(images, cfg, checkpoint_dir=out_dir, log_path=log_path)
    click.echo(
        f"baseline PSNR {result.baseline.mean_psnr:.3f} / SSIM {result.baseline.mean_ssim:.4f}\n"
        f"enhanced PSNR {result.enhanced.mean_psnr:.3f} / SSIM {result.enhanced.mean_ssim:.4f}\n"
        f"gain +{result.psnr_gain:.3f} dB / +{result.ssim_gain:.4f} SSIM"
    )


@main.command("sweep")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--knob", type=click.Choice(["k", "patch-size"]), required=True)
@click.option("--values", required=True, help="comma-separated knob values")
@click.option("--size", default=128, show_default=True)
@click.option("--patch-size", default=32, show_default=True)
@click.option("--k", default=3, show_default=True)
@click.option("--iters", default=500, show_default=True)
@click.option("--holdout", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
def sweep_cmd(corpus_dir, knob, values, size, patch_size, k, iters, holdout, seed, report_path):
    """Ablation sweep over the cluster count or the patch size."""
    images = load_corpus(corpus_dir, size)
    vals = [int(v) for v in values.split(",")]
    lines = [f"{knob}\tbaseline_psnr\tpsnr\tbaseline_ssim\tssim"]
    for v in vals:
        cfg = ExperimentConfig(
            patch_size=v if knob == "patch-size" else patch_size,
            k=v if knob == "k" else k,
            seed=seed,
            train_iters=iters,
            holdout=holdout,
        )
        result = run_experiment(images, cfg)
        lines.append(
            f"{v}\t{result.baseline.mean_psnr:.3f}\t{result.enhanced.mean_psnr:.3f}"
            f"\t{result.baseline.mean_ssim:.4f}\t{result.enhanced.mean_ssim:.4f}"
        )
    table = "\n".join(lines)
    click.echo(table)
    if report_path:
        with open(report_path, "w") as fh:
            fh.write(table + "\n")


@main.command("bench")
@click.option("--side", default=512, show_default=True)
@click.option("--repeats", default=5, show_default=True)
def bench_cmd(side, repeats):
    """Compare the compiled blur kernel against the NumPy fallback."""
    import time

    from . import kernels
    from .kernels import _blur_np
    from .kernels._common import gaussian_kernel_1d

    rng = np.random.default_rng(0)
    plane = rng.random((side, side))
    kernel = gaussian_kernel_1d(1.5, 5)
    backends = {"numpy": _blur_np.sep_convolve_2d}
    if kernels.BACKEND == "cython":
        from .kernels import _blur_cy

        backends["cython"] = _blur_cy.sep_convolve_2d
    else:
        click.echo("compiled kernel not built; benchmarking the fallback only")
    for name, fn in backends.items():
        fn(plane, kernel)  # warm-up
        start = time.perf_counter()
        for _ in range(repeats):
            fn(plane, kernel)
        elapsed = (time.perf_counter() - start) / repeats
        click.echo(f"{name:>7}: {elapsed * 1e3:8.2f} ms per {side}x{side} blur")


if __name__ == "__main__":
    main()
