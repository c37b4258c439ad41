"""Image I/O, patch serialization/reassembly, and dataset manifests.

Canonical pixel domain everywhere downstream is float32 in [0, 1];
integer <-> float conversion happens only here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

VALID_SPLITS = ("train", "val", "test")
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


class DataError(Exception):
    """Raised on invalid or empty datasets."""


class StructuralError(Exception):
    """Raised when a patch grid is incomplete or inconsistent."""


@dataclass
class ImageRecord:
    pixels: np.ndarray  # HxWx3 float32 in [0, 1]
    source_path: str = ""
    original_size: tuple[int, int] = (0, 0)

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


@dataclass
class PatchRecord:
    pixels: np.ndarray  # PxPx3 float32
    grid_row: int
    grid_col: int
    parent_id: str = ""

    @property
    def patch_size(self) -> int:
        return self.pixels.shape[0]


@dataclass
class PatchGrid:
    patches: list[PatchRecord]
    rows: int
    cols: int
    patch_size: int
    parent_id: str = ""


@dataclass
class DatasetManifest:
    entries: list[tuple[str, str, str | None]]  # (path, split, optional label)
    root: str = ""

    def paths(self, split: str | None = None) -> list[str]:
        return [p for p, s, _ in self.entries if split is None or s == split]


def load_image(path: str, target_size: int = 512) -> ImageRecord:
    """Load an 8/16-bit raster, rescale to [0,1], bilinear-resize to a square."""
    try:
        with Image.open(path) as img:
            img.load()
            original_size = img.size
            arr = _to_float_rgb(img)
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise OSError(f"cannot decode image {path!r}: {exc}") from exc
    arr = _resize_bilinear(arr, target_size)
    return ImageRecord(
        pixels=np.clip(arr, 0.0, 1.0).astype(np.float32),
        source_path=str(path),
        original_size=original_size,
    )


def _to_float_rgb(img: Image.Image) -> np.ndarray:
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def _resize_bilinear(arr: np.ndarray, target_size: int) -> np.ndarray:
    if arr.shape[0] == target_size and arr.shape[1] == target_size:
        return arr
    planes = []
    for c in range(arr.shape[2]):
        plane = Image.fromarray(arr[:, :, c].astype(np.float32), mode="F")
        plane = plane.resize((target_size, target_size), Image.BILINEAR)
        planes.append(np.asarray(plane, dtype=np.float64))
    return np.stack(planes, axis=-1)


def save_image(record: ImageRecord, path: str) -> None:
    """Write as 8-bit PNG."""
    arr = np.clip(record.pixels, 0.0, 1.0)
    img = Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="RGB")
    img.save(path, format="PNG")


def patchify(image: ImageRecord, patch_size: int) -> PatchGrid:
    """Tile the image into non-overlapping patches, row-major order."""
    side = image.side
    if patch_size <= 0 or side % patch_size != 0:
        raise ValueError(f"patch_size {patch_size} does not divide image side {side}")
    n = side // patch_size
    parent_id = image.source_path or "<memory>"
    patches = []
    for r in range(n):
        for c in range(n):
            block = image.pixels[
                r * patch_size : (r + 1) * patch_size,
                c * patch_size : (c + 1) * patch_size,
            ].copy()
            patches.append(PatchRecord(pixels=block, grid_row=r, grid_col=c, parent_id=parent_id))
    return PatchGrid(patches=patches, rows=n, cols=n, patch_size=patch_size, parent_id=parent_id)


def reassemble(grid: PatchGrid) -> ImageRecord:
    """Pixel-exact inverse of patchify; errors on a missing cell."""
    side = grid.rows * grid.patch_size
    out = np.empty((side, grid.cols * grid.patch_size, 3), dtype=np.float32)
    seen = set()
    for p in grid.patches:
        seen.add((p.grid_row, p.grid_col))
        out[
            p.grid_row * grid.patch_size : (p.grid_row + 1) * grid.patch_size,
            p.grid_col * grid.patch_size : (p.grid_col + 1) * grid.patch_size,
        ] = p.pixels
    for r in range(grid.rows):
        for c in range(grid.cols):
            if (r, c) not in seen:
                raise StructuralError(f"grid cell ({r}, {c}) is missing")
    return ImageRecord(pixels=out, source_path=grid.parent_id)


def build_manifest(
    root: str, split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> DatasetManifest:
    """Deterministically split every image under root into train/val/test."""
    if abs(sum(split_fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {split_fractions}")
    files = sorted(
        os.path.join(root, f)
        for f in os.listdir(root)
        if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not files:
        raise DataError(f"no images found under {root!r}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(files))
    counts = _split_counts(len(files), split_fractions)
    entries: list[tuple[str, str, str | None]] = []
    start = 0
    for split, count in zip(VALID_SPLITS, counts):
        for idx in order[start : start + count]:
            entries.append((files[idx], split, None))
        start += count
    entries.sort(key=lambda e: e[0])
    return DatasetManifest(entries=entries, root=root)


def _split_counts(n: int, fractions: tuple[float, float, float]) -> list[int]:
    counts = [int(np.floor(f * n)) for f in fractions]
    remainders = [f * n - c for f, c in zip(fractions, counts)]
    # hand leftover items to the largest fractional parts, lowest index first
    for _ in range(n - sum(counts)):
        i = int(np.argmax(remainders))
        counts[i] += 1
        remainders[i] = -1.0
    return counts


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    with open(path, "w") as fh:
        for entry_path, split, label in manifest.entries:
            fh.write(f"{entry_path}\t{split}\t{label if label is not None else ''}\n")


def load_manifest(path: str) -> DatasetManifest:
    entries: list[tuple[str, str, str | None]] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            entry_path, split = parts[0], parts[1] if len(parts) > 1 else "train"
            if split not in VALID_SPLITS:
                raise DataError(f"unknown split tag {split!r} in {path}")
            label = parts[2] if len(parts) > 2 and parts[2] else None
            entries.append((entry_path, split, label))
    return DatasetManifest(entries=entries, root=os.path.dirname(path))
