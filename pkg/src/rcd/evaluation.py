"""CMC rank-k and mAP for query/gallery retrieval under the Market1501 protocol."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoValidQueries
from .losses import FeatureRecord, distance_matrix, stack_features


@dataclass(frozen=True)
class RetrievalResult:
    cmc: np.ndarray
    mAP: float
    valid_queries: int
    ap: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "map": float(self.mAP),
            "cmc": [float(v) for v in self.cmc],
            "valid_queries": int(self.valid_queries),
        }


def evaluate(
    queries: Sequence[FeatureRecord],
    gallery: Sequence[FeatureRecord],
    max_rank: int = 50,
    cam_filter: bool = True,
) -> RetrievalResult:
    """Rank the gallery for every query by Euclidean distance and score the ranking.

    Gallery entries sharing both identity and camera with the query are
    removed (unless ``cam_filter`` is off), as are junk/distractor entries
    (identity < 1). Queries left with no true match are skipped. Distance
    ties keep gallery order. The CMC curve has ``min(max_rank, len(gallery))``
    entries.
    """
    if max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    if not queries or not gallery:
        raise NoValidQueries("empty query or gallery set")
    dist = distance_matrix(stack_features(queries), stack_features(gallery))
    max_rank = min(max_rank, len(gallery))

    g_ids = np.array([g.identity for g in gallery])
    g_cams = np.array([g.camera for g in gallery])
    order = np.argsort(dist, axis=1, kind="stable")

    all_cmc, all_ap = [], []
    for qi, q in enumerate(queries):
        if q.identity < 1:
            continue
        ranked = order[qi]
        ids, cams = g_ids[ranked], g_cams[ranked]
        keep = ids >= 1
        if cam_filter:
            keep &= ~((ids == q.identity) & (cams == q.camera))
        hits = (ids[keep] == q.identity).astype(np.float64)
        n_pos = hits.sum()
        if n_pos == 0:
            continue
        cum = np.cumsum(hits)
        cmc = np.ones(max_rank)
        head = np.minimum(cum[:max_rank], 1.0)
        cmc[: len(head)] = head
        all_cmc.append(cmc)
        precision = cum / np.arange(1, len(hits) + 1)
        all_ap.append(float(np.sum(precision * hits) / n_pos))

    if not all_ap:
        raise NoValidQueries("no query has a valid true match in the gallery")
    ap = np.array(all_ap)
    return RetrievalResult(np.mean(np.stack(all_cmc), axis=0), float(np.mean(ap)), len(ap), ap)
