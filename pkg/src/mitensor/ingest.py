"""Image decoding and dataset discovery.

Images become :class:`GrayImage` mass grids at their native resolution and
native 0-255 scale. Datasets follow the directory-per-class layout of the
4-class Alzheimer MRI collection, or an explicit ``path,label`` CSV.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImage, EmptyDataset, FileNotReadable, UnsupportedFormat

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8"


class ClassLabel(enum.IntEnum):
    """Dementia stage, ordered by severity."""

    NON_DEMENTED = 0
    VERY_MILD_DEMENTED = 1
    MILD_DEMENTED = 2
    MODERATE_DEMENTED = 3

    @property
    def dirname(self) -> str:
        return _DIRNAMES[self]

    @classmethod
    def parse(cls, text) -> "ClassLabel":
        """Accept a directory name, an enum member name or an integer code."""
        if isinstance(text, cls):
            return text
        key = str(text).strip()
        for label, name in _DIRNAMES.items():
            if key == name or key.upper() == label.name:
                return label
        try:
            return cls(int(key))
        except ValueError:
            raise ValueError(f"unknown class label {text!r}") from None


_DIRNAMES = {
    ClassLabel.NON_DEMENTED: "NonDemented",
    ClassLabel.VERY_MILD_DEMENTED: "VeryMildDemented",
    ClassLabel.MILD_DEMENTED: "MildDemented",
    ClassLabel.MODERATE_DEMENTED: "ModerateDemented",
}


@dataclass(frozen=True)
class GrayImage:
    """A grid of non-negative intensities, one row per image row.

    ``pixels`` has shape ``(height, width)``; each value is a point mass with
    a conversion factor of one.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("intensities must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: ClassLabel


@dataclass
class DatasetManifest:
    root: Path
    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def labels(self) -> list[ClassLabel]:
        return [e.label for e in self.entries]


def _sniff(path: Path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read(8)


def load_image(path) -> GrayImage:
    """Decode a PNG or JPEG file into a :class:`GrayImage`.

    Color images are reduced with BT.601 luma weights on the 8-bit channels;
    16-bit grayscale PNGs are rescaled to 0-255.
    """
    path = Path(path)
    try:
        head = _sniff(path)
    except OSError as exc:
        raise FileNotReadable(f"{path}: {exc.strerror or exc}") from exc

    looks_like_image = head.startswith(_PNG_MAGIC) or head.startswith(_JPEG_MAGIC)
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "JPEG"):
                raise UnsupportedFormat(f"{path}: {img.format} images are not supported")
            img.load()
            arr = _to_gray(img)
    except UnidentifiedImageError as exc:
        if looks_like_image:
            raise CorruptImage(f"{path}: {exc}") from exc
        raise UnsupportedFormat(f"{path}: not a PNG or JPEG file") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return GrayImage(arr)


def _to_gray(img: Image.Image) -> np.ndarray:
    mode = img.mode
    if mode == "L":
        return np.asarray(img, dtype=np.float64)
    if mode == "LA":
        return np.asarray(img.getchannel("L"), dtype=np.float64)
    if mode == "1":
        return np.asarray(img.convert("L"), dtype=np.float64)
    if mode.startswith("I;16") or mode == "I":
        return np.asarray(img, dtype=np.float64) / 257.0
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def scan_dataset(root) -> DatasetManifest:
    """List every image under the four class directories of ``root``.

    Entries are sorted by their path relative to ``root`` so the manifest
    does not depend on filesystem enumeration order.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotReadable(f"{root}: not a directory")

    known = {label.dirname: label for label in ClassLabel}
    found = []
    for child in sorted(root.iterdir()):
        if not child.is_dir():
            continue
        label = known.get(child.name)
        if label is None:
            logger.warning("ignoring unknown subdirectory %s", child)
            continue
        for p in child.rglob("*"):
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
                found.append((p.relative_to(root).as_posix(), label))

    if not found:
        raise EmptyDataset(f"{root}: no images found in any class directory")
    found.sort(key=lambda item: item[0])
    return DatasetManifest(root, [ManifestEntry(root / rel, label) for rel, label in found])


def load_manifest_csv(csv_path) -> DatasetManifest:
    """Read a ``path,label`` CSV. Relative paths resolve against the CSV's folder."""
    csv_path = Path(csv_path)
    try:
        fh = open(csv_path, newline="")
    except OSError as exc:
        raise FileNotReadable(f"{csv_path}: {exc.strerror or exc}") from exc
    root = csv_path.parent
    entries = []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
            raise ValueError(f"{csv_path}: manifest header must contain path,label")
        for row in reader:
            p = Path(row["path"])
            if not p.is_absolute():
                p = root / p
            if not p.is_file():
                raise FileNotReadable(f"{p}: listed in manifest but missing")
            entries.append(ManifestEntry(p, ClassLabel.parse(row["label"])))
    if not entries:
        raise EmptyDataset(f"{csv_path}: manifest has no entries")
    return DatasetManifest(root, entries)


def load_dataset(source) -> DatasetManifest:
    """Scan a directory, or read a manifest CSV when ``source`` is a file."""
    source = Path(source)
    if source.is_file():
        return load_manifest_csv(source)
    return scan_dataset(source)
