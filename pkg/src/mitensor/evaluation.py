"""Holdout splitting, classification metrics and per-class trend statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ClassTooSmall, EmptyTestSet, MissingClass
from .features import FeatureVector
from .ingest import ClassLabel
from .svm import MultiClassModel, argmax_label, class_scores

N_CLASSES = len(ClassLabel)


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _test_count(n: int, fraction: float) -> int:
    # at least one test item, at least one train item
    return min(max(1, _round_half_up(n * fraction)), n - 1)


def stratified_split(items: Sequence, config: SplitConfig = SplitConfig(), labels: Optional[Sequence] = None):
    """Split ``items`` into ``(train, test)`` lists.

    Labels are read from ``item.label`` unless given explicitly. Each class
    is shuffled with a generator seeded by ``config.seed`` and contributes
    ``round(count * test_fraction)`` items (at least one) to the test side.
    Both sides keep the input order.
    """
    items = list(items)
    if labels is None:
        labels = [it.label for it in items]
    labels = list(labels)
    if len(labels) != len(items):
        raise ValueError("items and labels differ in length")
    rng = np.random.default_rng(config.seed)
    test_idx = []

    if config.stratified:
        groups = {}
        for idx, lab in enumerate(labels):
            groups.setdefault(lab, []).append(idx)
        for lab in sorted(groups, key=int):
            members = groups[lab]
            if len(members) < 2:
                raise ClassTooSmall(f"class {lab!s} has {len(members)} item(s); stratification needs 2")
            order = rng.permutation(len(members))
            k = _test_count(len(members), config.test_fraction)
            test_idx.extend(members[i] for i in order[:k])
    else:
        if len(items) < 2:
            raise ClassTooSmall("need at least 2 items to split")
        order = rng.permutation(len(items))
        test_idx = order[: _test_count(len(items), config.test_fraction)].tolist()

    in_test = np.zeros(len(items), dtype=bool)
    in_test[test_idx] = True
    train = [it for it, t in zip(items, in_test) if not t]
    test = [it for it, t in zip(items, in_test) if t]
    return train, test


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray  # rows true, cols predicted
    precision: list
    recall: list
    precision_undefined: list
    recall_undefined: list

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "total": self.total,
            "confusion": self.confusion.tolist(),
            "classes": [label.dirname for label in ClassLabel],
            "precision": self.precision,
            "recall": self.recall,
            "precision_undefined": self.precision_undefined,
            "recall_undefined": self.recall_undefined,
        }


def metrics_from_predictions(y_true: Sequence, y_pred: Sequence) -> Metrics:
    if len(y_true) == 0:
        raise EmptyTestSet("no samples to evaluate")
    if len(y_true) != len(y_pred):
        raise ValueError("prediction and truth lengths differ")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[int(t), int(p)] += 1
    correct = int(np.trace(confusion))
    total = int(confusion.sum())

    precision, recall, p_undef, r_undef = [], [], [], []
    for k in range(N_CLASSES):
        predicted = int(confusion[:, k].sum())
        actual = int(confusion[k, :].sum())
        precision.append(confusion[k, k] / predicted if predicted else 0.0)
        recall.append(confusion[k, k] / actual if actual else 0.0)
        p_undef.append(predicted == 0)
        r_undef.append(actual == 0)
    return Metrics(
        accuracy=correct / total,
        confusion=confusion,
        precision=[float(v) for v in precision],
        recall=[float(v) for v in recall],
        precision_undefined=p_undef,
        recall_undefined=r_undef,
    )


def evaluate(model: MultiClassModel, test: Sequence[FeatureVector]) -> Metrics:
    if len(test) == 0:
        raise EmptyTestSet("test set is empty")
    scores = class_scores(model, test)
    predicted = [argmax_label(row) for row in scores]
    return metrics_from_predictions([f.label for f in test], predicted)


@dataclass(frozen=True)
class ClassStat:
    count: int
    mean_asymmetry: float
    mean_mass: float
    mean_lambda1: float
    mean_lambda2: float


def class_statistics(features: Sequence[FeatureVector]) -> dict:
    """Per-class means of asymmetry, total mass and both eigenvalues.

    Returns a dict keyed by :class:`ClassLabel` in code order; classes with no
    samples are left out.
    """
    groups = {}
    for f in features:
        groups.setdefault(f.label, []).append(f)
    stats = {}
    for label in ClassLabel:
        members = groups.get(label)
        if not members:
            continue
        n = len(members)
        stats[label] = ClassStat(
            count=n,
            mean_asymmetry=math.fsum(f.delta for f in members) / n,
            mean_mass=math.fsum(f.mass for f in members) / n,
            mean_lambda1=math.fsum(f.lambda1 for f in members) / n,
            mean_lambda2=math.fsum(f.lambda2 for f in members) / n,
        )
    return stats


@dataclass(frozen=True)
class PairCheck:
    milder: ClassLabel
    severer: ClassLabel
    margin: float  # milder value minus severer value

    @property
    def ok(self) -> bool:
        return self.margin > 0


@dataclass
class ChainResult:
    quantity: str
    pairs: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.ok for p in self.pairs)

    @property
    def first_violation(self) -> Optional[PairCheck]:
        return next((p for p in self.pairs if not p.ok), None)


@dataclass
class TrendReport:
    mass: ChainResult
    asymmetry: ChainResult

    @property
    def passed(self) -> bool:
        return self.mass.passed and self.asymmetry.passed

    def format(self) -> str:
        lines = []
        for chain in (self.mass, self.asymmetry):
            lines.append(f"{chain.quantity}: {'PASS' if chain.passed else 'FAIL'}")
            for p in chain.pairs:
                flag = "ok" if p.ok else "VIOLATION"
                lines.append(f"  {p.milder.dirname} > {p.severer.dirname}: margin {p.margin:.17g} {flag}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            chain.quantity: {
                "passed": chain.passed,
                "pairs": [
                    {"milder": p.milder.dirname, "severer": p.severer.dirname, "margin": p.margin, "ok": p.ok}
                    for p in chain.pairs
                ],
            }
            for chain in (self.mass, self.asymmetry)
        }


def trend_check(stats: dict) -> TrendReport:
    """Check that mean mass and mean asymmetry fall strictly with severity.

    A failed chain is reported, not raised; only a missing class raises.
    """
    missing = [label.dirname for label in ClassLabel if label not in stats or stats[label].count < 1]
    if missing:
        raise MissingClass(f"trend check needs all four classes; missing {', '.join(missing)}")
    order = list(ClassLabel)
    chains = []
    for quantity, attr in (("mass", "mean_mass"), ("asymmetry", "mean_asymmetry")):
        chain = ChainResult(quantity)
        for milder, severer in zip(order, order[1:]):
            margin = getattr(stats[milder], attr) - getattr(stats[severer], attr)
            chain.pairs.append(PairCheck(milder, severer, margin))
        chains.append(chain)
    return TrendReport(*chains)
