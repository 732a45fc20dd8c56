"""Batch-hard triplet loss, identity loss and their sum over precomputed features.

Features and class probabilities are inputs here; no network is involved.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateBatch, DimensionMismatch, LabelOutOfRange, MissingProbs, ParseError

DEFAULT_MARGIN = 0.3
PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class FeatureRecord:
    identity: int
    feature: np.ndarray
    probs: np.ndarray | None = None
    camera: int = 0
    path: str = ""

    def __post_init__(self):
        f = np.asarray(self.feature, dtype=np.float64)
        if f.ndim != 1:
            raise ValueError("feature must be a 1-D vector")
        object.__setattr__(self, "feature", f)
        if self.probs is not None:
            p = np.asarray(self.probs, dtype=np.float64)
            if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
                raise ValueError("probs must be a non-negative vector summing to 1")
            object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class TripletSelection:
    anchor: int
    positive: int
    negative: int
    d_pos: float
    d_neg: float


def pairwise_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def stack_features(batch: Sequence[FeatureRecord]) -> np.ndarray:
    dims = {r.feature.shape[0] for r in batch}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed feature dimensions {sorted(dims)}")
    return np.stack([r.feature for r in batch])


def distance_matrix(x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    """Euclidean distances between rows of ``x`` and rows of ``y``, from explicit differences."""
    y = x if y is None else y
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"feature dimensions {x.shape[1]} and {y.shape[1]} differ")
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def mine_hard_triplets(batch: Sequence[FeatureRecord]) -> list[TripletSelection]:
    """Hardest positive (farthest same-label) and hardest negative (nearest other-label) per anchor.

    Ties go to the smallest batch index.
    """
    labels = np.array([r.identity for r in batch])
    uniq, counts = np.unique(labels, return_counts=True)
    if len(uniq) < 2:
        raise DegenerateBatch("batch needs at least two identities")
    if np.any(counts < 2):
        lonely = uniq[counts < 2].tolist()
        raise DegenerateBatch(f"identities with a single record: {lonely}")

    dist = distance_matrix(stack_features(batch))
    same = labels[:, None] == labels[None, :]
    n = len(batch)
    pos = np.where(same & ~np.eye(n, dtype=bool), dist, -np.inf)
    neg = np.where(~same, dist, np.inf)
    # argmax/argmin return the first occurrence, which is the tie-break rule
    j = np.argmax(pos, axis=1)
    k = np.argmin(neg, axis=1)
    rows = np.arange(n)
    d_pos = dist[rows, j]
    d_neg = dist[rows, k]
    return [
        TripletSelection(i, int(j[i]), int(k[i]), float(d_pos[i]), float(d_neg[i]))
        for i in range(n)
    ]


def triplet_loss(selections: Sequence[TripletSelection], margin: float = DEFAULT_MARGIN, paper_literal: bool = False) -> float:
    """Mean hinge ``max(0, margin + d_pos - d_neg)``.

    ``paper_literal=True`` instead averages ``margin + d_pos + d_neg`` with no
    hinge, the expression as typeset in the source material, kept only for
    side-by-side comparison.
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    if not selections:
        return 0.0
    d_pos = np.array([s.d_pos for s in selections])
    d_neg = np.array([s.d_neg for s in selections])
    if paper_literal:
        return float(np.mean(margin + d_pos + d_neg))
    return float(np.mean(np.maximum(0.0, margin + d_pos - d_neg)))


def id_loss(batch: Sequence[FeatureRecord]) -> float:
    """Mean negative log-likelihood of the true identity; probabilities floored at 1e-12."""
    if not batch:
        return 0.0
    nll = []
    for i, r in enumerate(batch):
        if r.probs is None:
            raise MissingProbs(f"record {i} has no class probabilities")
        if not 0 <= r.identity < len(r.probs):
            raise LabelOutOfRange(f"record {i}: label {r.identity} outside [0, {len(r.probs)})")
        nll.append(-math.log(max(r.probs[r.identity], PROB_FLOOR)))
    return float(np.mean(nll))


def total_loss(batch: Sequence[FeatureRecord], margin: float = DEFAULT_MARGIN) -> tuple[float, float, float]:
    l_tri = triplet_loss(mine_hard_triplets(batch), margin)
    l_id = id_loss(batch)
    return l_tri, l_id, l_tri + l_id


# --- feature CSV -------------------------------------------------------------
# header: identity,camera,path,f0..f{d-1}[,p0..p{C-1}]


def read_feature_csv(path) -> list[FeatureRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        try:
            header = next(rows)
        except StopIteration:
            raise ParseError("empty file", path=str(path)) from None
        if header[:3] != ["identity", "camera", "path"]:
            raise ParseError("header must start with identity,camera,path", 1, str(path))
        f_cols = [c for c in header[3:] if c.startswith("f")]
        p_cols = [c for c in header[3:] if c.startswith("p")]
        d, n_cls = len(f_cols), len(p_cols)
        if header[3:] != [f"f{i}" for i in range(d)] + [f"p{i}" for i in range(n_cls)] or d == 0:
            raise ParseError("feature columns must be f0..f{d-1} followed by optional p0..p{C-1}", 1, str(path))
        out = []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(row)}", lineno, str(path))
            try:
                identity, camera = int(row[0]), int(row[1])
                values = [float(v) for v in row[3:]]
                out.append(FeatureRecord(
                    identity,
                    np.array(values[:d]),
                    np.array(values[d:]) if n_cls else None,
                    camera,
                    row[2],
                ))
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    return out


def write_feature_csv(records: Sequence[FeatureRecord], path) -> None:
    if not records:
        raise ValueError("no records to write")
    d = records[0].feature.shape[0]
    n_cls = 0 if records[0].probs is None else records[0].probs.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["identity", "camera", "path"] + [f"f{i}" for i in range(d)] + [f"p{i}" for i in range(n_cls)])
        for r in records:
            probs = [] if r.probs is None else [repr(float(v)) for v in r.probs]
            w.writerow([r.identity, r.camera, r.path] + [repr(float(v)) for v in r.feature] + probs)
