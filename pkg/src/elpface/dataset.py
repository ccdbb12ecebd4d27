"""Face corpus ingestion from a directory tree and seeded split management.

The expected layout is one sub-directory per identity::

    root/
      Some_Person/img_0001.png
      Other_Person/img_0001.png
      ...

Images are decoded to 8-bit grayscale and ordered by (identity name,
filename), so the corpus is deterministic regardless of filesystem
enumeration order. Identities with too few decodable images are dropped;
undecodable files are excluded with a warning and recorded in the manifest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .imaging import GrayImage, load_image, resize_bilinear

log = logging.getLogger(__name__)

# Identities qualify with strictly more than this many images.
DEFAULT_MIN_COUNT = 100


@dataclass(frozen=True)
class ImageCorpus:
    """Decoded images plus identity labels ready for descriptor extraction."""

    images: list
    labels: np.ndarray
    names: list
    paths: list

    def __len__(self):
        return len(self.images)


@dataclass
class CorpusManifest:
    """Ingestion record: what was found, kept, and excluded."""

    root: str
    min_count: int
    counts: dict = field(default_factory=dict)
    excluded_identities: dict = field(default_factory=dict)
    skipped_files: list = field(default_factory=list)
    image_size: tuple | None = None
    resized: bool = False
    total: int = 0

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "selection_rule": f"count > {self.min_count}",
            "counts": self.counts,
            "excluded_identities": self.excluded_identities,
            "skipped_files": self.skipped_files,
            "image_size": list(self.image_size) if self.image_size else None,
            "resized": self.resized,
            "total": self.total,
        }


def ingest(
    root,
    min_count: int = DEFAULT_MIN_COUNT,
    expected_size: tuple | None = None,
    resize: bool = False,
):
    """Load an identity tree into an ImageCorpus plus its manifest.

    ``min_count`` keeps only identities with strictly more images;
    ``expected_size`` (height, width) rejects corpora of any other uniform
    size unless ``resize`` bilinearly resizes every image to it. Without
    ``expected_size`` any size is accepted but it must be uniform; offenders
    are listed in the raised error.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist or is not a directory")

    manifest = CorpusManifest(root=str(root), min_count=min_count, resized=resize)
    per_identity: dict[str, list] = {}
    for identity_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        loaded = []
        for file in sorted(p for p in identity_dir.iterdir() if p.is_file()):
            try:
                img = load_image(file)
            except Exception as exc:  # undecodable: exclude, record, keep going
                log.warning("skipping undecodable file %s: %s", file, exc)
                manifest.skipped_files.append(str(file))
                continue
            loaded.append((str(file), img))
        if loaded:
            per_identity[identity_dir.name] = loaded

    if not per_identity:
        raise FileNotFoundError(f"no identity directory under {root} holds a decodable image")

    kept = {}
    for name, loaded in per_identity.items():
        if len(loaded) > min_count:
            kept[name] = loaded
            manifest.counts[name] = len(loaded)
        else:
            manifest.excluded_identities[name] = len(loaded)
    if not kept:
        raise ValueError(
            f"no identity under {root} exceeds the selection threshold of {min_count} images"
        )

    if resize:
        if expected_size is None:
            raise ValueError("resize requires an expected_size to resize to")
        kept = {
            name: [(p, resize_bilinear(img, *expected_size)) for p, img in loaded]
            for name, loaded in kept.items()
        }

    sizes = {}
    for name, loaded in kept.items():
        for path, img in loaded:
            sizes.setdefault((img.height, img.width), []).append(path)
    target = expected_size or max(sizes, key=lambda s: len(sizes[s]))
    offenders = [p for size, paths in sizes.items() if size != tuple(target) for p in paths]
    if offenders:
        shown = ", ".join(offenders[:5]) + ("..." if len(offenders) > 5 else "")
        raise DimensionError(
            f"{len(offenders)} image(s) deviate from the {target[0]}x{target[1]} "
            f"corpus size (pass resize=True to unify): {shown}"
        )

    names = sorted(kept)
    images, labels, paths = [], [], []
    for label, name in enumerate(names):
        for path, img in kept[name]:
            images.append(img)
            labels.append(label)
            paths.append(path)
    manifest.image_size = tuple(target)
    manifest.total = len(images)
    corpus = ImageCorpus(images, np.asarray(labels, dtype=np.int64), names, paths)
    return corpus, manifest


def split_indices(n: int, train_fraction: float = 0.8, seed: int = 0, labels=None):
    """Seeded random train/test index split.

    Sizes are ``round(n * fraction)`` and the remainder; the two sets are
    disjoint and exhaustive. With ``labels`` the split is stratified: the
    fraction is applied within each class (the paper-style default is the
    plain unstratified shuffle).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if n < 2:
        raise ValueError(f"cannot split {n} item(s)")
    rng = np.random.default_rng(seed)
    if labels is None:
        perm = rng.permutation(n)
        n_train = int(np.floor(n * train_fraction + 0.5))
        n_train = min(max(n_train, 1), n - 1)  # both sides stay non-empty
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    labels = np.asarray(labels)
    train_parts, test_parts = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        perm = idx[rng.permutation(idx.size)]
        n_train = int(np.floor(idx.size * train_fraction + 0.5))
        n_train = min(max(n_train, 1), idx.size - 1) if idx.size > 1 else idx.size
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))
