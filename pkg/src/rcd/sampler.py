"""Identity-balanced (PK) batch sampling."""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import Manifest, SampleRecord
from .errors import InsufficientIdentities
from .imgcore import RngStream


@dataclass(frozen=True)
class BatchSpec:
    K: int
    M: int
    seed: int = 0

    def __post_init__(self):
        if self.K < 2 or self.M < 2:
            raise ValueError(f"K and M must both be >= 2, got K={self.K}, M={self.M}")

    @property
    def size(self) -> int:
        return self.K * self.M


@dataclass(frozen=True)
class Batch:
    entries: tuple[tuple[SampleRecord, int], ...]

    @property
    def records(self) -> list[SampleRecord]:
        return [r for r, _ in self.entries]

    @property
    def identities(self) -> list[int]:
        return [r.identity for r, _ in self.entries]


def sample_batch(manifest: Manifest, spec: BatchSpec, rng: RngStream) -> Batch:
    """Draw K identities without replacement and M images for each.

    Identities with at least M images contribute M distinct images. Smaller
    identities contribute every image once and fill the remaining slots by
    drawing with replacement. Distractor identities are never chosen.
    """
    groups = manifest.by_identity()
    if len(groups) < spec.K:
        raise InsufficientIdentities(f"need {spec.K} identities, manifest has {len(groups)} usable")
    chosen = rng.sample(sorted(groups), spec.K)
    entries = []
    for pid in chosen:
        pool = groups[pid]
        if len(pool) >= spec.M:
            picks = rng.sample(pool, spec.M)
        else:
            picks = list(pool)
            picks += [pool[rng.randint(0, len(pool))] for _ in range(spec.M - len(pool))]
            rng.shuffle(picks)
        entries.extend(picks)
    return Batch(tuple((r, i) for i, r in enumerate(entries)))
