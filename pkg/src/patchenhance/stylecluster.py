"""Style domains over high-quality patches: a small convolutional
autoencoder learns patch embeddings, k-means groups them, and the
largest cluster becomes the target style domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .imagedata import DataError, PatchRecord
from .quality import _patch_tensor


@dataclass
class AEConfig:
    patch_size: int = 128
    embedding_dim: int = 64
    width: int = 16
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0


class StyleAutoencoder(nn.Module):
    """En: patch -> D-vector; De: D-vector -> patch in [0,1]."""

    def __init__(self, cfg: AEConfig):
        super().__init__()
        if cfg.patch_size % 8 != 0:
            raise ValueError(f"patch_size must be a multiple of 8, got {cfg.patch_size}")
        w = cfg.width
        self.bottleneck_side = cfg.patch_size // 8
        self.encoder = nn.Sequential(
            nn.Conv2d(3, w, 3, 2, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, 2, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, 2, 1),
            nn.ReLU(inplace=True),
        )
        self.to_code = nn.Linear(4 * w * self.bottleneck_side**2, cfg.embedding_dim)
        self.from_code = nn.Linear(cfg.embedding_dim, 4 * w * self.bottleneck_side**2)
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(4 * w, 2 * w, 3, 1, 1),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, 1, 1),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(w, 3, 3, 1, 1),
            nn.Sigmoid(),
        )
        self.width = w

    def encode(self, x):
        return self.to_code(self.encoder(x).flatten(1))

    def decode(self, z):
        s = self.bottleneck_side
        h = self.from_code(z).view(-1, 4 * self.width, s, s)
        return self.decoder(h)

    def forward(self, x):
        return self.decode(self.encode(x))


@dataclass
class AEParams:
    state: dict
    config: AEConfig
    final_loss: float = float("nan")

    def build(self) -> StyleAutoencoder:
        net = StyleAutoencoder(self.config)
        net.load_state_dict(self.state)
        net.eval()
        return net


@dataclass
class StyleEmbedding:
    vector: np.ndarray
    patch_ref: str


@dataclass
class StyleDomains:
    assignments: dict[str, int]
    centroids: np.ndarray  # K x D
    target_id: int
    k: int

    def cluster_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for c in self.assignments.values():
            sizes[c] += 1
        return sizes

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "target_id": self.target_id,
                "centroids": self.centroids.tolist(),
                "assignments": self.assignments,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StyleDomains":
        d = json.loads(text)
        return cls(
            assignments={k: int(v) for k, v in d["assignments"].items()},
            centroids=np.asarray(d["centroids"], dtype=np.float64),
            target_id=int(d["target_id"]),
            k=int(d["k"]),
        )


def train_style_autoencoder(patches, config: AEConfig) -> AEParams:
    """Minimize ||De(En(x)) - x||_2^2 over the high-quality patch set."""
    patches = list(patches)
    if not patches:
        raise DataError("cannot train the style autoencoder on an empty set")
    torch.manual_seed(config.seed)
    net = StyleAutoencoder(config)
    x = _patch_tensor(patches)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    sampler = torch.Generator().manual_seed(config.seed)
    n = x.shape[0]
    final = float("nan")
    for _ in range(config.epochs):
        order = torch.randperm(n, generator=sampler)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            opt.zero_grad(set_to_none=True)
            loss = F.mse_loss(net(x[idx]), x[idx])
            loss.backward()
            opt.step()
    net.eval()
    with torch.no_grad():
        final = float(F.mse_loss(net(x), x))
    return AEParams(
        state={k: v.clone() for k, v in net.state_dict().items()},
        config=config,
        final_loss=final,
    )


def embed(patch, params: AEParams) -> StyleEmbedding:
    return embed_batch([patch], params)[0]


def embed_batch(patches, params: AEParams) -> list[StyleEmbedding]:
    patches = list(patches)
    x = _patch_tensor(patches)
    if x.shape[2] != params.config.patch_size:
        raise ValueError(
            f"patch size {x.shape[2]} != autoencoder input {params.config.patch_size}"
        )
    net = params.build()
    with torch.no_grad():
        z = net.encode(x).numpy().astype(np.float64)
    out = []
    for i, p in enumerate(patches):
        ref = (
            f"{p.parent_id}:{p.grid_row},{p.grid_col}"
            if isinstance(p, PatchRecord)
            else f"patch_{i}"
        )
        out.append(StyleEmbedding(vector=z[i], patch_ref=ref))
    return out


def kmeans(
    points: np.ndarray, k: int, seed: int = 0, max_iters: int = 300, tol: float = 1e-6
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm with k-means++ init.

    Stops when the relative centroid shift drops below tol. Returns
    (labels, centroids, per-iteration inertia history).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise DataError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        for c in range(k):
            members = points[labels == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its centroid
                far = int(d2[np.arange(n), labels].argmax())
                new_centroids[c] = points[far]
        shift = np.linalg.norm(new_centroids - centroids)
        scale = np.linalg.norm(centroids) or 1.0
        centroids = new_centroids
        if shift / scale < tol:
            break
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, centroids, history


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            ((points[:, None, :] - np.asarray(centroids)[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        total = d2.sum()
        if total == 0:
            centroids.append(points[rng.integers(n)])
            continue
        probs = d2 / total
        centroids.append(points[rng.choice(n, p=probs)])
    return np.asarray(centroids, dtype=np.float64)


def cluster_styles(embeddings: list[StyleEmbedding], k: int, seed: int = 0) -> StyleDomains:
    if len(embeddings) < k:
        raise DataError(f"need at least k={k} embeddings, got {len(embeddings)}")
    points = np.stack([e.vector for e in embeddings])
    labels, centroids, _ = kmeans(points, k, seed=seed)
    assignments = {e.patch_ref: int(c) for e, c in zip(embeddings, labels)}
    domains = StyleDomains(assignments=assignments, centroids=centroids, target_id=-1, k=k)
    domains.target_id = select_target_domain(domains)
    return domains


def save_ae(params: AEParams, path: str) -> None:
    torch.save(
        {"config": vars(params.config), "state": params.state, "final_loss": params.final_loss},
        path,
    )


def load_ae(path: str) -> AEParams:
    d = torch.load(path, weights_only=False)
    return AEParams(state=d["state"], config=AEConfig(**d["config"]), final_loss=d["final_loss"])


def select_target_domain(domains: StyleDomains) -> int:
    """Cluster id with the most patches; ties break to the lowest id."""
    sizes = domains.cluster_sizes()
    if sum(sizes) == 0:
        raise DataError("all clusters are empty")
    return int(np.argmax(sizes))
