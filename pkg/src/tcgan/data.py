"""Factor-labeled image data: archive loaders, a procedural synthetic set, batching."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch


class DataError(Exception):
    """Raised when an archive is malformed or a sampling precondition fails."""


@dataclass
class FactorDataset:
    """Images paired with ground-truth discrete factor labels.

    ``images`` is [N, C, H, W] float32 in [-1, 1]; ``factor_values`` is
    [N, K] integer class indices with ``factor_values[:, k] < factor_sizes[k]``.
    """

    images: torch.Tensor
    factor_values: torch.Tensor
    factor_sizes: tuple[int, ...]
    factor_names: tuple[str, ...]
    is_complete_grid: bool = False

    def __post_init__(self):
        self.factor_sizes = tuple(int(s) for s in self.factor_sizes)
        self.factor_names = tuple(self.factor_names)
        if self.images.ndim != 4:
            raise DataError(f"images must be [N, C, H, W], got shape {tuple(self.images.shape)}")
        n = self.images.shape[0]
        if self.factor_values.shape[0] != n:
            raise DataError(
                f"count mismatch: {n} images vs {self.factor_values.shape[0]} factor rows"
            )
        k = self.factor_values.shape[1]
        if len(self.factor_sizes) != k or len(self.factor_names) != k:
            raise DataError(
                f"factor metadata mismatch: {k} columns vs sizes {self.factor_sizes} names {self.factor_names}"
            )
        for j, size in enumerate(self.factor_sizes):
            col = self.factor_values[:, j]
            if col.min() < 0 or col.max() >= size:
                raise DataError(f"factor {self.factor_names[j]} has values outside [0, {size})")
        lo, hi = self.images.min().item(), self.images.max().item()
        if lo < -1.0 or hi > 1.0:
            raise DataError(f"pixel range [{lo}, {hi}] outside [-1, 1]")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    @property
    def n_factors(self) -> int:
        return len(self.factor_sizes)


@dataclass(frozen=True)
class SyntheticSpec:
    """Procedural square-on-canvas dataset: full factorial grid of (x, y, size)."""

    image_size: int = 32
    x_positions: int = 8
    y_positions: int = 8
    sizes: int = 4

    def __post_init__(self):
        if min(self.x_positions, self.y_positions, self.sizes) < 2:
            raise ValueError("each factor grid needs >= 2 values")
        if self.max_side > self.image_size:
            raise ValueError(
                f"largest square (side {self.max_side}) exceeds the {self.image_size}px canvas"
            )
        span = self.image_size - self.max_side + 1
        if span < max(self.x_positions, self.y_positions):
            raise ValueError("not enough distinct pixel positions for the requested grid")

    @property
    def max_side(self) -> int:
        return self.side(self.sizes - 1)

    def side(self, size_index: int) -> int:
        return 4 + 2 * size_index

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "x_positions": self.x_positions,
            "y_positions": self.y_positions,
            "sizes": self.sizes,
        }


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> FactorDataset:
    """Render the full factorial grid of squares; deterministic for a given spec.

    ``seed`` is reserved for future subsampling and does not affect the full
    grid.
    """
    del seed
    size = spec.image_size
    span = size - spec.max_side
    xs = np.round(np.linspace(0, span, spec.x_positions)).astype(int)
    ys = np.round(np.linspace(0, span, spec.y_positions)).astype(int)
    images = []
    factors = []
    for xi, x0 in enumerate(xs):
        for yi, y0 in enumerate(ys):
            for si in range(spec.sizes):
                side = spec.side(si)
                img = np.full((size, size), -1.0, dtype=np.float32)
                img[y0 : y0 + side, x0 : x0 + side] = 1.0
                images.append(img)
                factors.append((xi, yi, si))
    imgs = torch.from_numpy(np.stack(images)[:, None, :, :])
    return FactorDataset(
        images=imgs,
        factor_values=torch.tensor(factors, dtype=torch.long),
        factor_sizes=(spec.x_positions, spec.y_positions, spec.sizes),
        factor_names=("pos_x", "pos_y", "size"),
        is_complete_grid=True,
    )


def _metadata_dict(raw) -> dict:
    meta = raw[()] if isinstance(raw, np.ndarray) else raw
    # dSprites metadata was pickled from python 2; keys may be bytes.
    return {k.decode() if isinstance(k, bytes) else k: v for k, v in dict(meta).items()}


def load_factor_archive(path, factor_names: tuple[str, ...] | None = None) -> FactorDataset:
    """Load a compressed array container with imgs / latents_classes / metadata.

    Column 0 of ``latents_classes`` is the constant color factor and is
    dropped. Pixels are normalized to [-1, 1]; binary {0, 1} sources map to
    exactly {-1, 1}.
    """
    with np.load(path, allow_pickle=True, encoding="latin1") as archive:
        for key in ("imgs", "latents_classes", "metadata"):
            if key not in archive:
                raise DataError(f"archive is missing array {key!r}")
        imgs = archive["imgs"]
        classes = archive["latents_classes"].astype(np.int64)
        meta = _metadata_dict(archive["metadata"])
    if "latents_sizes" not in meta:
        raise DataError("archive metadata is missing 'latents_sizes'")
    sizes = [int(s) for s in np.asarray(meta["latents_sizes"]).ravel()]
    if imgs.shape[0] != classes.shape[0]:
        raise DataError(f"count mismatch: {imgs.shape[0]} images vs {classes.shape[0]} factor rows")
    if classes.shape[1] != len(sizes):
        raise DataError(
            f"count mismatch: {classes.shape[1]} factor columns vs {len(sizes)} metadata sizes"
        )

    # Drop the constant color column.
    sizes = sizes[1:]
    classes = classes[:, 1:]
    if factor_names is None:
        names = meta.get("latents_names")
        if names is not None:
            names = tuple(n.decode() if isinstance(n, bytes) else str(n) for n in names)[1:]
        else:
            names = tuple(f"factor_{j}" for j in range(len(sizes)))
        factor_names = names

    pixel_max = int(meta.get("pixel_max", 1 if imgs.max() <= 1 else 255))
    pixels = imgs.astype(np.float32) * (2.0 / pixel_max) - 1.0
    if pixels.ndim == 3:
        pixels = pixels[:, None, :, :]
    n = pixels.shape[0]
    return FactorDataset(
        images=torch.from_numpy(pixels),
        factor_values=torch.from_numpy(classes),
        factor_sizes=tuple(sizes),
        factor_names=factor_names,
        is_complete_grid=n == math.prod(sizes),
    )


def load_dsprites(path) -> FactorDataset:
    """Load the dSprites archive with its canonical five factor names."""
    ds = load_factor_archive(path, factor_names=("shape", "scale", "orientation", "posX", "posY"))
    if ds.n_factors != 5:
        raise DataError(f"expected 5 dSprites factors after dropping color, got {ds.n_factors}")
    return ds


def save_factor_archive(ds: FactorDataset, path):
    """Write a dataset in the same container layout the loaders read.

    A constant color column is prepended for layout parity with dSprites.
    """
    arr = ds.images.numpy()
    vals = np.unique(arr)
    binary = vals.size <= 2 and set(np.round(vals, 4).tolist()) <= {-1.0, 1.0}
    pixel_max = 1 if binary else 255
    imgs = np.round((arr + 1.0) * (pixel_max / 2.0)).astype(np.uint8)
    if imgs.shape[1] == 1:
        imgs = imgs[:, 0]
    classes = np.concatenate(
        [np.zeros((len(ds), 1), dtype=np.int64), ds.factor_values.numpy()], axis=1
    )
    meta = {
        "latents_sizes": np.array([1, *ds.factor_sizes]),
        "latents_names": ("color", *ds.factor_names),
        "pixel_max": pixel_max,
    }
    np.savez_compressed(path, imgs=imgs, latents_classes=classes, metadata=meta)


def sample_fixed_factor_pairs(
    ds: FactorDataset, factor_index: int, n_pairs: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample index pairs that agree on one factor.

    For each pair a factor value is drawn uniformly over the values present,
    then both members uniformly (with replacement) from the matching rows.
    Returns two index arrays of length ``n_pairs``.
    """
    col = ds.factor_values[:, factor_index].numpy()
    values = np.unique(col)
    pools = {v: np.flatnonzero(col == v) for v in values}
    if max(len(p) for p in pools.values()) < 2:
        raise DataError(f"no value of factor {factor_index} has two examples")
    idx_a = np.empty(n_pairs, dtype=np.int64)
    idx_b = np.empty(n_pairs, dtype=np.int64)
    choices = values[rng.integers(len(values), size=n_pairs)]
    for i, v in enumerate(choices):
        pool = pools[v]
        idx_a[i] = pool[rng.integers(len(pool))]
        idx_b[i] = pool[rng.integers(len(pool))]
    return idx_a, idx_b


def epoch_batch_indices(n: int, batch_size: int, seed: int, epoch: int) -> np.ndarray:
    """Seed-determined shuffled batch indices for one epoch, remainder dropped."""
    rng = np.random.default_rng((seed, epoch))
    perm = rng.permutation(n)
    n_batches = n // batch_size
    return perm[: n_batches * batch_size].reshape(n_batches, batch_size)


def batches(ds: FactorDataset, batch_size: int, seed: int, epochs: int = 1):
    """Yield full image batches over ``epochs`` deterministic shuffled passes."""
    if batch_size > len(ds):
        raise ValueError(f"batch_size {batch_size} exceeds dataset size {len(ds)}")
    for epoch in range(epochs):
        for row in epoch_batch_indices(len(ds), batch_size, seed, epoch):
            yield ds.images[torch.from_numpy(row)]
