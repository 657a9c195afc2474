"""
Image-folder dataset in the CCSN layout: ``<root>/<Abbrev>/<file>``.

Loading, the seeded 80:20 split, the synthetic desk-scale generator and the
manifest export live here.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import (
    ConfigError,
    DataError,
    DatasetEmptyError,
    EmptyClassError,
    MalformedImageError,
    UnwritablePathError,
    UndecodableImageError,
)
from ..imaging import resize_bilinear
from .classes import ABBREVIATIONS, CLASS_INDEX, CLASS_TABLE, NUM_CLASSES
from .codecs import decode_pixels, encode_png, encode_ppm, to_unit_float

logger = logging.getLogger(__name__)

MIN_SYNTHETIC_SIZE = 8


@dataclass
class Sample:
    """One image with its class index and path relative to the dataset root."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    label: int
    path: str
    source_size: Tuple[int, int] = (0, 0)  # (width, height) before resizing


@dataclass
class Dataset:
    """Ordered list of samples."""

    samples: List[Sample] = field(default_factory=list)
    root: Optional[str] = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def paths(self) -> List[str]:
        return [s.path for s in self.samples]

    def images(self, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """Stack images into (n, H, W, 3)."""
        chosen = self.samples if indices is None else [self.samples[i] for i in indices]
        if not chosen:
            raise DatasetEmptyError("no samples selected")
        return np.stack([s.image for s in chosen])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_CLASSES) if self.samples else np.zeros(NUM_CLASSES, int)

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        return Dataset([self.samples[i] for i in indices], root=self.root)


def _decode_file(root: Path, relative: str, image_size: int) -> Sample:
    path = root / relative
    try:
        pixels = decode_pixels(path.read_bytes())
    except (MalformedImageError, UndecodableImageError, OSError) as e:
        raise UndecodableImageError(str(path), getattr(e, "message", str(e)))
    height, width = pixels.shape[:2]
    image = to_unit_float(pixels)
    if (height, width) != (image_size, image_size):
        image = resize_bilinear(image, image_size, image_size)
    return Sample(image, CLASS_INDEX[relative.split("/")[0]], relative, (width, height))


def load_dataset(root, image_size: int = 256, workers: int = 1) -> Dataset:
    """
    Ingest every image below the class subdirectories of ``root``.

    Samples are ordered lexicographically by relative path regardless of the
    number of decoding workers; images are bilinearly resized to
    ``image_size`` squared.

    Raises:
        DataError: root is not a directory
        UndecodableImageError: a file cannot be decoded (path included)
        EmptyClassError: a class directory holds no files
        DatasetEmptyError: no images at all
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root '{root}' is not a directory")

    relatives: List[str] = []
    for entry in sorted(os.listdir(root)):
        entry_path = root / entry
        if not entry_path.is_dir():
            continue
        if entry not in CLASS_INDEX:
            logger.warning(f"Skipping unknown subdirectory '{entry}' in {root}")
            continue
        files = [f for f in sorted(os.listdir(entry_path))
                 if not f.startswith(".") and (entry_path / f).is_file()]
        if not files:
            raise EmptyClassError(entry, str(entry_path))
        relatives.extend(f"{entry}/{f}" for f in files)

    if not relatives:
        raise DatasetEmptyError(f"no class directories with images below '{root}'")
    relatives.sort()

    with ThreadPoolExecutor(max_workers=workers) as executor:
        samples = list(executor.map(lambda rel: _decode_file(root, rel, image_size), relatives))

    dataset = Dataset(samples, root=str(root))
    counts = dataset.class_counts()
    missing = [ABBREVIATIONS[i] for i in range(NUM_CLASSES) if counts[i] == 0]
    if missing:
        logger.warning(f"Classes without a directory in {root}: {', '.join(missing)}")
    summary = ", ".join(f"{abbr}={counts[i]}" for i, abbr in enumerate(ABBREVIATIONS))
    logger.info(f"Loaded {len(dataset)} images from {root} ({summary})")
    return dataset


def split_indices(labels: Sequence[int], seed: int, mode: str = "stratified",
                  train_fraction: float = 0.8) -> Tuple[List[int], List[int]]:
    """
    Seeded train/validation split of sample indices.

    Stratified mode shuffles each class with one generator (classes visited in
    index order) and sends the first floor(fraction·n_c) to training; global
    mode does the same over all samples at once. Both index lists come back
    sorted.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DatasetEmptyError("cannot split an empty dataset")
    if mode not in ("stratified", "global"):
        raise ConfigError(f"unknown split mode '{mode}'", key="split")
    fraction = Fraction(str(train_fraction))
    rng = np.random.default_rng(seed)

    def _take(indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n_train = math.floor(len(indices) * fraction)
        order = rng.permutation(indices)
        return order[:n_train], order[n_train:]

    if mode == "global":
        train, validation = _take(np.arange(labels.size))
    else:
        train_parts, val_parts = [], []
        for c in range(int(labels.max()) + 1):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue
            if members.size < 2:
                logger.warning(f"Class {c} has {members.size} sample(s); split leaves one side empty")
            t, v = _take(members)
            train_parts.append(t)
            val_parts.append(v)
        train = np.concatenate(train_parts)
        validation = np.concatenate(val_parts)
    return sorted(train.tolist()), sorted(validation.tolist())


def split_80_20(ds: Dataset, seed: int, mode: str = "stratified",
                train_fraction: float = 0.8) -> Tuple[Dataset, Dataset]:
    """Split a dataset into (train, validation); see :func:`split_indices`."""
    if len(ds) == 0:
        raise DatasetEmptyError("cannot split an empty dataset")
    train, validation = split_indices(ds.labels, seed, mode, train_fraction)
    logger.info(f"Split ({mode}, seed {seed}): {len(train)} train / {len(validation)} validation")
    return ds.subset(train), ds.subset(validation)


def _class_colour(label: int) -> np.ndarray:
    angle = 2.0 * np.pi * label / NUM_CLASSES
    return 0.5 + 0.3 * np.cos(angle + np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0]))


def synthetic_image(label: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Procedural texture for one class: an oriented sinusoid whose frequency and
    orientation depend on the class, over a class-specific colour, plus noise.
    """
    frequency = 1.0 + label
    theta = np.pi * label / NUM_CLASSES
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amplitude = rng.uniform(0.15, 0.25)
    y, x = np.mgrid[0:size, 0:size] / size
    wave = np.sin(2.0 * np.pi * frequency * (x * np.cos(theta) + y * np.sin(theta)) + phase)
    image = _class_colour(label)[None, None, :] + amplitude * wave[..., None]
    image = image + rng.normal(0.0, 0.04, size=(size, size, 3))
    return np.clip(image, 0.0, 1.0)


def gen_synthetic(out_dir, num_per_class: int, size: int, seed: int,
                  fmt: str = "ppm") -> List[Path]:
    """
    Write a seeded synthetic dataset in the CCSN layout.

    Each image has its own generator seeded by (seed, class, index), so reruns
    produce bitwise-identical files.

    Raises:
        ConfigError: size < 8, num_per_class < 1 or unknown format
        UnwritablePathError: the tree cannot be written
    """
    if size < MIN_SYNTHETIC_SIZE:
        raise ConfigError(f"synthetic image size must be >= {MIN_SYNTHETIC_SIZE}, got {size}", key="size")
    if num_per_class < 1:
        raise ConfigError("num_per_class must be >= 1", key="per_class")
    encoders = {"ppm": encode_ppm, "png": encode_png}
    if fmt not in encoders:
        raise ConfigError(f"unknown image format '{fmt}'", key="format")
    encode = encoders[fmt]

    out_dir = Path(out_dir)
    written: List[Path] = []
    try:
        for label, cloud in enumerate(CLASS_TABLE):
            class_dir = out_dir / cloud.abbreviation
            class_dir.mkdir(parents=True, exist_ok=True)
            for i in range(num_per_class):
                rng = np.random.default_rng(np.random.SeedSequence([seed, label, i]))
                path = class_dir / f"{cloud.abbreviation}_{i:04d}.{fmt}"
                path.write_bytes(encode(synthetic_image(label, size, rng)))
                written.append(path)
    except OSError as e:
        raise UnwritablePathError(str(out_dir), str(e))
    logger.info(f"Wrote {len(written)} synthetic images ({size}x{size}, {fmt}) to {out_dir}")
    return written


def manifest_frame(ds: Dataset) -> pd.DataFrame:
    """Manifest table: path, class index, source width and height."""
    return pd.DataFrame({
        "path": ds.paths,
        "class_index": ds.labels,
        "width": [s.source_size[0] for s in ds.samples],
        "height": [s.source_size[1] for s in ds.samples],
    })


def class_count_frame(ds: Dataset) -> pd.DataFrame:
    """Per-class counts with names and abbreviations."""
    counts = ds.class_counts()
    return pd.DataFrame({
        "class_index": range(NUM_CLASSES),
        "name": [c.name for c in CLASS_TABLE],
        "abbreviation": ABBREVIATIONS,
        "count": counts[:NUM_CLASSES],
    })


def export_manifest(ds: Dataset, path) -> Path:
    """Write the dataset manifest as CSV."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        manifest_frame(ds).to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise UnwritablePathError(str(path), str(e))
    logger.info(f"Manifest with {len(ds)} rows exported to {path}")
    return path
