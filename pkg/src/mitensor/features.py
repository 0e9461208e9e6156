"""Per-image feature vectors and their standardization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData
from .inertia import InertiaTensor, asymmetry, compute_tensor, eigenvalues, total_mass
from .ingest import ClassLabel, GrayImage

FEATURE_NAMES = ("lambda1", "lambda2", "delta", "mass")
DEFAULT_SELECTION = ("lambda1", "lambda2")


@dataclass
class FeatureVector:
    lambda1: float
    lambda2: float
    delta: float
    mass: float
    label: Optional[ClassLabel] = None
    tensor: Optional[InertiaTensor] = None
    path: Optional[str] = None

    def values(self, selection: Sequence[str]) -> np.ndarray:
        return np.array([getattr(self, name) for name in selection], dtype=np.float64)


def parse_selection(spec) -> tuple[str, ...]:
    """Turn ``"lambda1,mass"`` (or a sequence of names) into a checked selection."""
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    names = tuple(n.strip() for n in names if n.strip())
    if not names:
        raise ValueError("feature selection must not be empty")
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown features {unknown}; choose from {', '.join(FEATURE_NAMES)}")
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate features in selection {names}")
    return names


def extract_features(image: GrayImage) -> FeatureVector:
    tensor = compute_tensor(image)
    eig = eigenvalues(tensor)
    return FeatureVector(
        lambda1=eig.lambda1,
        lambda2=eig.lambda2,
        delta=asymmetry(eig),
        mass=total_mass(image),
        tensor=tensor,
    )


def feature_matrix(vectors: Sequence[FeatureVector], selection: Sequence[str]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, len(selection)))
    return np.stack([v.values(selection) for v in vectors])


@dataclass
class Standardizer:
    selection: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def fit_standardizer(vectors: Sequence[FeatureVector], selection=DEFAULT_SELECTION) -> Standardizer:
    """Population mean and standard deviation of each selected feature.

    Features whose deviation is below 1e-12 get a deviation of 1 so they are
    only centered.
    """
    selection = parse_selection(selection)
    if len(vectors) < 2:
        raise InsufficientData(f"need at least 2 vectors to fit a standardizer, got {len(vectors)}")
    x = feature_matrix(vectors, selection)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(selection, mean, std)


def apply_standardizer(s: Standardizer, v: FeatureVector, selection=None) -> np.ndarray:
    selection = s.selection if selection is None else parse_selection(selection)
    if tuple(selection) != s.selection:
        raise ValueError(f"standardizer was fitted on {s.selection}, not {tuple(selection)}")
    return s.transform(v.values(selection))
