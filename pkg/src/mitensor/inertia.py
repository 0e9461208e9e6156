"""Moment-of-inertia tensor of an image treated as a planar mass distribution.

Pixel ``(p, q)`` (row, column) sits at ``(x_q, y_p)`` on a grid spanning
``[-1, 1]`` in both directions, with row 0 at ``y = +1``. Its intensity is
its mass. The tensor is::

    | i00  i01 |     i00 =  sum m y^2
    | i01  i11 |     i01 = -sum m x y
                     i11 =  sum m x^2
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .ingest import GrayImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InertiaTensor:
    i00: float
    i01: float
    i11: float

    @property
    def i10(self) -> float:
        return self.i01

    @property
    def trace(self) -> float:
        return self.i00 + self.i11

    @property
    def det(self) -> float:
        return self.i00 * self.i11 - self.i01 * self.i01

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.i00, self.i01], [self.i01, self.i11]])


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class CoordinateGrid:
    xs: np.ndarray
    ys: np.ndarray


def _axis(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    # (2k - (n-1)) / (n-1) equals -1 + 2k/(n-1) and is exactly antisymmetric
    k = np.arange(n, dtype=np.float64)
    return (2.0 * k - (n - 1)) / (n - 1)


def coordinate_grid(width: int, height: int) -> CoordinateGrid:
    """Pixel-center coordinates, endpoint inclusive, origin at the image center."""
    if width < 1 or height < 1:
        raise ValueError("width and height must be positive")
    return CoordinateGrid(xs=_axis(width), ys=-_axis(height))


def compute_tensor(image: GrayImage) -> InertiaTensor:
    m = image.pixels
    grid = coordinate_grid(image.width, image.height)
    x = grid.xs[None, :]
    y = grid.ys[:, None]
    i00 = float(np.sum(m * (y * y)))
    i01 = -float(np.sum(m * (x * y)))
    i11 = float(np.sum(m * (x * x)))
    return InertiaTensor(i00, i01, i11)


def eigenvalues(tensor: InertiaTensor) -> EigenPair:
    """Eigenvalues of the symmetric 2x2 tensor, largest first.

    The larger root comes from ``mean + radius``. When ``radius`` is more than
    half of ``mean`` the smaller root is taken as ``det / lambda1``: the same
    value without the cancellation in ``mean - radius``.
    """
    # work on the tensor divided by its largest entry so det cannot under/overflow
    scale = max(abs(tensor.i00), abs(tensor.i01), abs(tensor.i11))
    if scale == 0.0:
        return EigenPair(0.0, 0.0)
    a, b, d = tensor.i00 / scale, tensor.i01 / scale, tensor.i11 / scale
    mean = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    lambda1 = mean + radius
    if radius > 0.5 * mean:
        lambda2 = (a * d - b * b) / lambda1
    else:
        lambda2 = mean - radius
    lambda1 *= scale
    lambda2 *= scale
    if lambda2 < 0.0:
        eps = 1e-9 * (lambda1 + 1.0)
        if lambda2 >= -eps:
            logger.debug("clamping lambda2=%r to 0", lambda2)
            lambda2 = 0.0
    return EigenPair(lambda1, lambda2)


def asymmetry(eig: EigenPair) -> float:
    return eig.lambda1 - eig.lambda2


def total_mass(image: GrayImage) -> float:
    return float(np.sum(image.pixels))
