"""Majority-vote ensemble error and the effect of swapping one component for a deviated one.

Votes and targets are +/-1. The ensemble outputs the sign of the vote sum;
a tied vote (sum 0) counts as half an error. Replacing component ``k`` with a
component voting ``g`` changes each instance's sum to ``sum - f[k] + g``.
The improvement condition is the per-instance error difference summed over
instances, which equals ``m * (E_old - E_new)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadVoteValue, DomainError, IndexOutOfRange, ParseError
from .imgcore import RngStream

_ERROR = {-1: 1.0, 0: 0.5, 1: 0.0}


def _check_votes(arr, what: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.size and not np.all((arr == 1) | (arr == -1)):
        raise BadVoteValue(f"{what} entries must be -1 or +1")
    return arr.astype(np.int64)


@dataclass(frozen=True, eq=False)
class VoteMatrix:
    votes: np.ndarray  # (N, m)
    expected: np.ndarray  # (m,)

    def __post_init__(self):
        votes = _check_votes(self.votes, "vote")
        expected = _check_votes(self.expected, "expected-output")
        if votes.ndim != 2 or expected.ndim != 1 or votes.shape[1] != expected.shape[0]:
            raise ValueError(f"votes {votes.shape} and expected {expected.shape} do not align")
        if votes.shape[0] < 1 or votes.shape[1] < 1:
            raise ValueError("need at least one component and one instance")
        object.__setattr__(self, "votes", votes)
        object.__setattr__(self, "expected", expected)

    @property
    def N(self) -> int:
        return self.votes.shape[0]

    @property
    def m(self) -> int:
        return self.votes.shape[1]

    def sums(self) -> np.ndarray:
        return self.votes.sum(axis=0)


@dataclass(frozen=True)
class EnsembleReport:
    component_errors: list[float]
    sum_votes: list[int]
    ensemble_error: float
    swapped_error: float | None = None
    condition_lhs: float | None = None
    condition_holds: bool | None = None

    @property
    def improvement(self) -> float | None:
        if self.swapped_error is None:
            return None
        return self.ensemble_error - self.swapped_error

    def to_dict(self) -> dict:
        return {
            "component_errors": self.component_errors,
            "sum_votes": self.sum_votes,
            "ensemble_error": self.ensemble_error,
            "swapped_error": self.swapped_error,
            "condition_lhs": self.condition_lhs,
            "condition_holds": self.condition_holds,
            "improvement": self.improvement,
        }


def error_fn(x: int) -> float:
    try:
        return _ERROR[x]
    except (KeyError, TypeError):
        raise DomainError(f"error is defined on {{-1, 0, 1}}, got {x!r}") from None


def _errors(signed: np.ndarray) -> np.ndarray:
    # vectorised error_fn on values already known to lie in {-1, 0, 1}
    return (1 - signed) / 2


def component_error(F: VoteMatrix, i: int) -> float:
    if not 0 <= i < F.N:
        raise IndexOutOfRange(f"component {i} outside [0, {F.N})")
    return float(np.mean(_errors(F.votes[i] * F.expected)))


def ensemble_error(F: VoteMatrix) -> float:
    return float(np.mean(_errors(np.sign(F.sums()) * F.expected)))


def _check_swap(F: VoteMatrix, k: int, g_k) -> np.ndarray:
    if not 0 <= k < F.N:
        raise IndexOutOfRange(f"component {k} outside [0, {F.N})")
    g = _check_votes(g_k, "replacement vote")
    if g.shape != (F.m,):
        raise ValueError(f"replacement votes need length {F.m}, got shape {g.shape}")
    return g


def swap_component(F: VoteMatrix, k: int, g_k) -> VoteMatrix:
    g = _check_swap(F, k, g_k)
    votes = F.votes.copy()
    votes[k] = g
    return VoteMatrix(votes, F.expected)


def check_condition(F: VoteMatrix, k: int, g_k) -> tuple[float, bool]:
    """Summed per-instance error reduction from swapping in ``g_k`` and whether it is >= 0."""
    g = _check_swap(F, k, g_k)
    sums = F.sums()
    before = _errors(np.sign(sums) * F.expected)
    after = _errors(np.sign(sums - F.votes[k] + g) * F.expected)
    lhs = float(np.sum(before - after))
    return lhs, lhs >= 0


def report(F: VoteMatrix, k: int | None = None, g_k=None) -> EnsembleReport:
    base = dict(
        component_errors=[component_error(F, i) for i in range(F.N)],
        sum_votes=[int(s) for s in F.sums()],
        ensemble_error=ensemble_error(F),
    )
    if k is None:
        return EnsembleReport(**base)
    lhs, holds = check_condition(F, k, g_k)
    return EnsembleReport(
        **base,
        swapped_error=ensemble_error(swap_component(F, k, g_k)),
        condition_lhs=lhs,
        condition_holds=holds,
    )


# --- Monte-Carlo sweep -------------------------------------------------------

SWEEP_HEADER = ("N", "err_base", "err_dev", "frac_holds", "mean_improvement")


@dataclass(frozen=True)
class SweepRow:
    N: int
    err_base: float
    err_dev: float
    frac_holds: float
    mean_improvement: float
    trials: int


def _random_votes(gen: np.random.Generator, expected: np.ndarray, err: float, shape) -> np.ndarray:
    wrong = gen.random(shape) < err
    return np.where(wrong, -expected, expected)


def sweep(
    n_values: Sequence[int],
    m: int,
    base_errors: Sequence[float],
    dev_errors: Sequence[float],
    trials: int,
    rng: RngStream,
) -> list[SweepRow]:
    """Monte-Carlo frequency of the improvement condition under i.i.d. component errors.

    Each trial draws random targets, N components that are each wrong on an
    instance independently with probability ``err_base``, and a deviated
    component wrong with probability ``err_dev``; the deviated component
    replaces component 0. Every grid cell gets its own substream, so rows do
    not depend on grid order.
    """
    if trials <= 0:
        return []
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    rows = []
    cell = 0
    for n in n_values:
        if n < 1:
            raise ValueError(f"N must be >= 1, got {n}")
        for eb in base_errors:
            for ed in dev_errors:
                gen = rng.split(cell, domain=rng.domain + 1).generator()
                cell += 1
                expected = np.where(gen.random((trials, m)) < 0.5, -1, 1)
                votes = _random_votes(gen, expected[:, None, :], eb, (trials, n, m))
                g = _random_votes(gen, expected, ed, (trials, m))
                sums = votes.sum(axis=1)
                before = _errors(np.sign(sums) * expected)
                after = _errors(np.sign(sums - votes[:, 0, :] + g) * expected)
                lhs = (before - after).sum(axis=1)
                rows.append(SweepRow(n, eb, ed, float(np.mean(lhs >= 0)), float(np.mean(lhs) / m), trials))
    return rows


def format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = [",".join(SWEEP_HEADER)]
    for r in rows:
        lines.append(f"{r.N},{r.err_base!r},{r.err_dev!r},{r.frac_holds!r},{r.mean_improvement!r}")
    return "\n".join(lines) + "\n"


# --- vote-matrix files -------------------------------------------------------
# line 1: expected outputs; each further line: one component's votes


def parse_vote_line(line: str, lineno: int, path) -> list[int]:
    try:
        values = [int(tok) for tok in line.split()]
    except ValueError:
        raise ParseError(f"non-integer vote in {line.strip()!r}", lineno, path) from None
    if any(v not in (-1, 1) for v in values):
        raise ParseError("votes must be -1 or +1", lineno, path)
    return values


def parse_vote_matrix(text: str, path=None) -> VoteMatrix:
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise ParseError("need an expected-output line and at least one component line", path=path)
    expected = parse_vote_line(lines[0][1], lines[0][0], path)
    votes = []
    for lineno, ln in lines[1:]:
        row = parse_vote_line(ln, lineno, path)
        if len(row) != len(expected):
            raise ParseError(f"expected {len(expected)} votes, got {len(row)}", lineno, path)
        votes.append(row)
    return VoteMatrix(np.array(votes), np.array(expected))


def load_vote_matrix(path) -> VoteMatrix:
    with open(path, encoding="utf-8") as fh:
        return parse_vote_matrix(fh.read(), str(path))


def format_vote_matrix(F: VoteMatrix) -> str:
    lines = [" ".join(str(int(v)) for v in F.expected)]
    lines += [" ".join(str(int(v)) for v in row) for row in F.votes]
    return "\n".join(lines) + "\n"
