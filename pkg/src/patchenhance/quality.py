"""Patch-level binary quality assessment.

A small CNN (4 strided conv blocks + global pool + linear head) stands
in for a large pretrained backbone: labels come either from a manifest
or are synthesized by pairing clean patches (HIGH) with degraded copies
(LOW).
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .imagedata import DataError, PatchRecord

PARAMS_MAGIC = "patchenhance-qa v1"
DEFAULT_THRESHOLD = 0.5


class QualityLabel(Enum):
    LOW = 0
    HIGH = 1


@dataclass
class QualityScore:
    p_high: float
    label: QualityLabel
    threshold_used: float


@dataclass
class QualityPartition:
    low: list[PatchRecord]
    high: list[PatchRecord]
    scores: list[QualityScore]


@dataclass
class QAConfig:
    input_size: int = 128
    width: int = 16
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0


class QualityNet(nn.Module):
    def __init__(self, width: int = 16):
        super().__init__()
        w = width

        def block(c_in, c_out):
            return [
                nn.Conv2d(c_in, c_out, 3, 2, 1),
                nn.GroupNorm(4, c_out),
                nn.ReLU(inplace=True),
            ]

        self.features = nn.Sequential(
            *block(3, w), *block(w, 2 * w), *block(2 * w, 4 * w), *block(4 * w, 4 * w)
        )
        self.head = nn.Linear(4 * w, 1)

    def forward(self, x):
        h = F.adaptive_avg_pool2d(self.features(x), 1).flatten(1)
        return self.head(h).squeeze(1)


@dataclass
class ClassifierParams:
    state: dict
    input_size: int
    width: int
    version: str = PARAMS_MAGIC

    def build(self) -> QualityNet:
        net = QualityNet(self.width)
        net.load_state_dict(self.state)
        net.eval()
        return net

    def arch_hash(self) -> str:
        text = f"{self.version};input={self.input_size};width={self.width}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _patch_tensor(patches) -> torch.Tensor:
    arrays = [p.pixels if isinstance(p, PatchRecord) else p for p in patches]
    return torch.from_numpy(np.stack(arrays).astype(np.float32)).permute(0, 3, 1, 2)


def train_quality_classifier(patches, labels, config: QAConfig) -> ClassifierParams:
    """Fit on binary-labeled patches (1 = HIGH quality). Deterministic per seed."""
    labels = np.asarray(labels, dtype=np.float32)
    if len(patches) != len(labels) or len(patches) == 0:
        raise DataError("need a non-empty, equal-length patch/label set")
    if len(np.unique(labels)) < 2:
        raise DataError("training set contains a single class")

    torch.manual_seed(config.seed)
    net = QualityNet(config.width)
    x = _patch_tensor(patches)
    y = torch.from_numpy(labels)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    sampler = torch.Generator().manual_seed(config.seed)
    n = x.shape[0]
    for _ in range(config.epochs):
        order = torch.randperm(n, generator=sampler)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            opt.zero_grad(set_to_none=True)
            loss = F.binary_cross_entropy_with_logits(net(x[idx]), y[idx])
            loss.backward()
            opt.step()
    net.eval()
    return ClassifierParams(
        state={k: v.clone() for k, v in net.state_dict().items()},
        input_size=x.shape[2],
        width=config.width,
    )


def assess(patch, params: ClassifierParams, threshold: float = DEFAULT_THRESHOLD) -> QualityScore:
    return batch_assess([patch], params, threshold)[0]


def batch_assess(patches, params: ClassifierParams, threshold: float = DEFAULT_THRESHOLD):
    x = _patch_tensor(patches)
    if x.shape[2] != params.input_size or x.shape[3] != params.input_size:
        raise ValueError(
            f"patch size {tuple(x.shape[2:])} != classifier input {params.input_size}"
        )
    net = params.build()
    with torch.no_grad():
        p_high = torch.sigmoid(net(x)).numpy()
    return [
        QualityScore(
            p_high=float(p),
            label=QualityLabel.HIGH if p >= threshold else QualityLabel.LOW,
            threshold_used=threshold,
        )
        for p in p_high
    ]


def partition(
    patches, params: ClassifierParams, threshold: float = DEFAULT_THRESHOLD
) -> QualityPartition:
    """Disjoint split of a patch list into X_L and X_H by classifier score."""
    patches = list(patches)
    if not patches:
        raise DataError("cannot partition an empty patch set")
    scores = batch_assess(patches, params, threshold)
    low = [p for p, s in zip(patches, scores) if s.label is QualityLabel.LOW]
    high = [p for p, s in zip(patches, scores) if s.label is QualityLabel.HIGH]
    return QualityPartition(low=low, high=high, scores=scores)


def save_params(params: ClassifierParams, path: str) -> None:
    """Binary blob with a text header: version, arch hash, input size."""
    header = (
        f"{params.version}\narch={params.arch_hash()}\n"
        f"input_size={params.input_size}\nwidth={params.width}\n\n"
    )
    buf = io.BytesIO()
    torch.save(params.state, buf)
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(buf.getvalue())


def load_params(path: str) -> ClassifierParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.index(b"\n\n")
    lines = raw[:sep].decode().splitlines()
    if lines[0] != PARAMS_MAGIC:
        raise ValueError(f"unsupported params file: {lines[0]!r}")
    meta = dict(line.split("=", 1) for line in lines[1:])
    state = torch.load(io.BytesIO(raw[sep + 2 :]), weights_only=True)
    return ClassifierParams(
        state=state, input_size=int(meta["input_size"]), width=int(meta["width"])
    )
