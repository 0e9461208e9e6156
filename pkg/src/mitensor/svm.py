"""Soft-margin kernel SVM trained with SMO, and its one-vs-rest extension.

The binary trainer solves the usual dual::

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0

two multipliers at a time. The first index sweeps the training set looking
for KKT violators; the second is drawn with a seeded generator from the
indices that can make progress with it, so training is reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InsufficientData, SingleClassData
from .features import DEFAULT_SELECTION, FeatureVector, Standardizer, feature_matrix, fit_standardizer, parse_selection
from .ingest import ClassLabel

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("linear", "rbf")
N_CLASSES = len(ClassLabel)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                raise ValueError(f"rbf kernel needs a finite positive gamma, got {self.gamma!r}")


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors have shapes {a.shape} and {b.shape}")
    if spec.kind == "linear":
        return float(np.dot(a, b))
    return float(np.exp(-spec.gamma * np.sum((a - b) ** 2)))


def gram_matrix(spec: KernelSpec, x, z) -> np.ndarray:
    """Kernel values between every row of ``x`` and every row of ``z``."""
    x, z = _as_2d(x), _as_2d(z)
    if x.shape[1] != z.shape[1]:
        raise DimensionMismatch(f"feature dimensions differ: {x.shape[1]} vs {z.shape[1]}")
    if spec.kind == "linear":
        return x @ z.T
    # squared distances accumulated per feature: exact, and no n*n*d temporary
    d2 = np.zeros((x.shape[0], z.shape[0]))
    for k in range(x.shape[1]):
        diff = x[:, k, None] - z[None, :, k]
        d2 += diff * diff
    return np.exp(-spec.gamma * d2)


@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    signs: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    n_features: int
    converged: bool = True
    sweeps: int = 0
    updates: int = 0
    degenerate: bool = False

    @classmethod
    def always_negative(cls, kernel: KernelSpec, c: float, n_features: int) -> "BinarySvmModel":
        """Placeholder for a class that had no training samples."""
        return cls(
            support_vectors=np.zeros((0, n_features)),
            alphas=np.zeros(0),
            signs=np.zeros(0),
            bias=-1.0,
            kernel=kernel,
            c=c,
            n_features=n_features,
            degenerate=True,
        )

    @property
    def n_support(self) -> int:
        return len(self.alphas)


def decision_batch(model: BinarySvmModel, x) -> np.ndarray:
    x = _as_2d(x)
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {x.shape[1]}")
    if model.n_support == 0:
        return np.full(x.shape[0], model.bias)
    k = gram_matrix(model.kernel, x, model.support_vectors)
    return k @ (model.alphas * model.signs) + model.bias


def decision(model: BinarySvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a single vector, got shape {x.shape}")
    return float(decision_batch(model, x)[0])


def dual_objective(alphas, y, gram) -> float:
    v = np.asarray(alphas) * np.asarray(y)
    return float(np.sum(alphas) - 0.5 * v @ gram @ v)


def train_binary(
    x,
    y,
    c: float = 1.0,
    kernel: KernelSpec = KernelSpec("linear"),
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    max_iter: int = 1_000_000,
    gram: Optional[np.ndarray] = None,
) -> BinarySvmModel:
    """Train a binary SVM with labels in {-1, +1}.

    Parameters
    ----------
    x : array_like, shape (n, d)
    y : array_like, shape (n,)
    c : float
        Box constraint.
    kernel : KernelSpec
    tol : float
        KKT tolerance on ``y_i * E_i``.
    max_passes : int
        Stop after this many consecutive sweeps without an update.
    seed : int
        Seeds the second-index selection.
    max_iter : int
        Cap on the number of pair updates. Hitting it returns the current
        model with ``converged=False``.
    gram : ndarray, optional
        Precomputed ``K(x, x)``; lets one-vs-rest share a single matrix.
    """
    x = _as_2d(x)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape != (n,):
        raise DimensionMismatch(f"{n} samples but {y.size} labels")
    if n < 2:
        raise InsufficientData("need at least 2 samples")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise SingleClassData("both labels must be present")
    if c <= 0:
        raise ValueError("c must be positive")

    k = gram_matrix(kernel, x, x) if gram is None else gram
    diag = k.diagonal().copy()
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    b = 0.0
    err = -y.copy()  # f(x_i) - y_i with every alpha at zero
    eta_min = 1e-12
    step_min = 1e-12 * c
    passes = sweeps = updates = 0
    capped = False

    while passes < max_passes:
        changed = 0
        for i in range(n):
            r = y[i] * err[i]
            if not ((r < -tol and alpha[i] < c) or (r > tol and alpha[i] > 0)):
                continue

            ai = alpha[i]
            same = y * y[i] > 0
            lo = np.where(same, np.maximum(0.0, ai + alpha - c), np.maximum(0.0, alpha - ai))
            hi = np.where(same, np.minimum(c, ai + alpha), np.minimum(c, c + alpha - ai))
            eta = diag[i] + diag - 2.0 * k[i]
            with np.errstate(divide="ignore", invalid="ignore"):
                target = alpha + y * (err[i] - err) / eta
            target = np.minimum(np.maximum(target, lo), hi)
            usable = (eta > eta_min) & (np.abs(target - alpha) > step_min)
            usable[i] = False
            candidates = np.flatnonzero(usable)
            if candidates.size == 0:
                continue
            j = int(candidates[rng.integers(candidates.size)])

            aj_old = alpha[j]
            aj = _snap(float(target[j]), c, step_min)
            ai_new = _snap(ai + y[i] * y[j] * (aj_old - aj), c, step_min)
            di = y[i] * (ai_new - ai)
            dj = y[j] * (aj - aj_old)

            b1 = b - err[i] - di * k[i, i] - dj * k[i, j]
            b2 = b - err[j] - di * k[i, j] - dj * k[j, j]
            if 0.0 < ai_new < c:
                b_new = b1
            elif 0.0 < aj < c:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)

            err += di * k[i] + dj * k[j] + (b_new - b)
            alpha[i], alpha[j], b = ai_new, aj, b_new
            changed += 1
            updates += 1
            if updates >= max_iter:
                capped = True
                break
        sweeps += 1
        if capped:
            logger.warning("SMO stopped at the update cap (%d) before converging", max_iter)
            break
        passes = passes + 1 if changed == 0 else 0

    g = k @ (alpha * y)
    b = _refit_bias(alpha, y, g, c)
    keep = alpha > 0.0
    return BinarySvmModel(
        support_vectors=x[keep].copy(),
        alphas=alpha[keep].copy(),
        signs=y[keep].copy(),
        bias=b,
        kernel=kernel,
        c=float(c),
        n_features=x.shape[1],
        converged=not capped,
        sweeps=sweeps,
        updates=updates,
    )


def _snap(a: float, c: float, eps: float) -> float:
    """Clip to [0, c], landing exactly on a bound when within ``eps`` of it."""
    if a < eps:
        return 0.0
    if a > c - eps:
        return c
    return a


def _refit_bias(alpha, y, g, c) -> float:
    """Bias consistent with the final multipliers.

    Averages over the free multipliers when there are any; otherwise takes
    the middle of the interval the bound multipliers allow.
    """
    margin = 1e-8 * c
    free = (alpha > margin) & (alpha < c - margin)
    if np.any(free):
        return float(np.mean(y[free] - g[free]))
    at_zero = alpha <= margin
    at_c = ~at_zero
    # y f >= 1 at zero, y f <= 1 at c; f = g + b
    lower_mask = (at_zero & (y > 0)) | (at_c & (y < 0))
    upper_mask = (at_zero & (y < 0)) | (at_c & (y > 0))
    lower = np.max(y[lower_mask] - g[lower_mask]) if np.any(lower_mask) else None
    upper = np.min(y[upper_mask] - g[upper_mask]) if np.any(upper_mask) else None
    if lower is None:
        return float(upper)
    if upper is None:
        return float(lower)
    return float(0.5 * (lower + upper))


@dataclass
class TrainConfig:
    c: float = 1.0
    kernel: str = "rbf"
    gamma: Optional[float] = None
    tol: float = 1e-3
    max_passes: int = 10
    max_iter: int = 1_000_000
    seed: int = 0
    selection: tuple = DEFAULT_SELECTION

    def __post_init__(self):
        self.selection = parse_selection(self.selection)
        if self.kernel not in KERNEL_KINDS:
            raise ValueError(f"kernel must be one of {KERNEL_KINDS}, got {self.kernel!r}")


@dataclass
class MultiClassModel:
    standardizer: Standardizer
    models: list
    config: TrainConfig
    format_version: int = 1

    @property
    def selection(self) -> tuple:
        return self.standardizer.selection

    @property
    def kernel(self) -> KernelSpec:
        return self.models[0].kernel


def default_gamma(z: np.ndarray) -> float:
    """``1 / (n_features * var)`` over the standardized training matrix."""
    var = float(np.var(z))
    return 1.0 / (z.shape[1] * var) if var > 0 else 1.0 / z.shape[1]


def train_multiclass(features: Sequence[FeatureVector], config: Optional[TrainConfig] = None) -> MultiClassModel:
    """One-vs-rest: one binary model per class, classes absent from training
    get an always-negative placeholder."""
    config = TrainConfig() if config is None else config
    if len(features) == 0:
        raise InsufficientData("training set is empty")
    if any(f.label is None for f in features):
        raise ValueError("every training vector needs a label")
    labels = np.array([int(f.label) for f in features])
    present = sorted(set(labels.tolist()))
    if len(present) < 2:
        raise InsufficientData(f"need at least 2 classes, got {len(present)}")

    standardizer = fit_standardizer(features, config.selection)
    z = standardizer.transform(feature_matrix(features, config.selection))
    if config.kernel == "rbf":
        gamma = config.gamma if config.gamma is not None else default_gamma(z)
        kernel = KernelSpec("rbf", float(gamma))
    else:
        kernel = KernelSpec("linear")
    gram = gram_matrix(kernel, z, z)

    models = []
    for label in ClassLabel:
        if int(label) not in present:
            models.append(BinarySvmModel.always_negative(kernel, config.c, z.shape[1]))
            continue
        y = np.where(labels == int(label), 1.0, -1.0)
        m = train_binary(
            z, y, c=config.c, kernel=kernel, tol=config.tol, max_passes=config.max_passes,
            seed=config.seed + int(label), max_iter=config.max_iter, gram=gram,
        )
        logger.info("class %s: %d support vectors, converged=%s", label.dirname, m.n_support, m.converged)
        models.append(m)
    return MultiClassModel(standardizer, models, replace(config, gamma=kernel.gamma))


def class_scores(model: MultiClassModel, features: Sequence[FeatureVector]) -> np.ndarray:
    """Decision values, shape (n, 4), columns in class-code order."""
    x = feature_matrix(features, model.selection)
    z = model.standardizer.transform(x)
    return np.column_stack([decision_batch(m, z) for m in model.models])


def argmax_label(scores) -> ClassLabel:
    # np.argmax returns the first maximum, i.e. the lowest class code on ties
    return ClassLabel(int(np.argmax(scores)))


def predict(model: MultiClassModel, image_features: FeatureVector):
    scores = class_scores(model, [image_features])[0]
    return argmax_label(scores), scores
