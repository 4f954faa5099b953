"""Statistics over round transcripts."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

from .transcript import CHECK_CATEGORIES, RoundCategory, RoundRecord, SiftResult

if TYPE_CHECKING:
    from .config import RunConfig

__all__ = [
    "Verdict",
    "RunReport",
    "qber",
    "verdict",
    "entropy_bits",
    "binary_entropy",
    "mutual_information",
    "detection_probability",
    "build_report",
]


class Verdict(enum.Enum):
    CONTINUE = "CONTINUE"
    ABORT = "ABORT"


def qber(check_pairs: Sequence[tuple[int, int]]) -> Optional[float]:
    """Fraction of mismatched ``(expected, observed)`` pairs; ``None`` if empty."""
    if not check_pairs:
        return None
    return sum(1 for e, o in check_pairs if e != o) / len(check_pairs)


def verdict(qbers: Mapping[RoundCategory, Optional[float]], threshold: float) -> Verdict:
    """ABORT when any present check-category rate strictly exceeds ``threshold``."""
    for cat in CHECK_CATEGORIES:
        rate = qbers.get(cat)
        if rate is not None and rate > threshold:
            return Verdict.ABORT
    return Verdict.CONTINUE


def entropy_bits(counts: Sequence[float]) -> float:
    """Shannon entropy in bits of the empirical distribution ``counts``."""
    total = sum(counts)
    if total <= 0:
        raise ValueError("counts must have a positive total")
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def mutual_information(joint_counts: Sequence[Sequence[int]]) -> float:
    """I(A;E) in bits from a 2x2 contingency table ``joint_counts[a][e]``.

    Computed as H(A) + H(E) - H(A,E), which equals the usual
    sum of p(a,e) log p(a,e)/(p(a)p(e)); empty cells contribute nothing.
    """
    if len(joint_counts) != 2 or any(len(row) != 2 for row in joint_counts):
        raise ValueError("joint_counts must be a 2x2 table")
    cells = [c for row in joint_counts for c in row]
    if any(c < 0 for c in cells):
        raise ValueError("counts must be nonnegative")
    if sum(cells) == 0:
        raise ValueError("joint_counts is all zero")
    (n00, n01), (n10, n11) = joint_counts
    h_a = entropy_bits([n00 + n01, n10 + n11])
    h_e = entropy_bits([n00 + n10, n01 + n11])
    h_ae = entropy_bits(cells)
    return max(0.0, h_a + h_e - h_ae)


def detection_probability(e: float, m: int) -> float:
    """Chance that at least one of ``m`` check photons shows an error of rate ``e``."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"e must lie in [0, 1], got {e!r}")
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m!r}")
    return 1.0 - (1.0 - e) ** m


@dataclass(frozen=True)
class RunReport:
    """Summary of one run.

    ``eve_agreement`` compares Eve's logged bits with Alice's raw key over the
    SIFT_Z rounds where Eve logged anything; it is ``None`` when she logged
    nothing.  ``mutual_information_bits`` is Eve's information per raw-key bit:
    the fraction of the key she logged times I(A;E)/H(A) on those rounds.
    """

    rounds: int
    counts: dict[RoundCategory, int]
    mismatches: dict[RoundCategory, int]
    qber: dict[RoundCategory, Optional[float]]
    raw_key_length: int
    sift_rate: float
    eve_agreement: Optional[float]
    eve_known_fraction: float
    mutual_information_bits: float
    verdict: Verdict
    threshold: float


def _eve_information(pairs: list[tuple[int, int]], raw_key_length: int) -> float:
    if not pairs:
        return 0.0
    table = [[0, 0], [0, 0]]
    for a, e in pairs:
        table[a][e] += 1
    h_a = entropy_bits([table[0][0] + table[0][1], table[1][0] + table[1][1]])
    if h_a == 0.0:
        return 0.0
    return len(pairs) / raw_key_length * (mutual_information(table) / h_a)


def build_report(records: Sequence[RoundRecord], sift_result: SiftResult, config: RunConfig) -> RunReport:
    if not records:
        raise ValueError("cannot build a report from an empty transcript")
    counts = {cat: 0 for cat in RoundCategory}
    for rec in records:
        counts[rec.category] += 1

    qbers: dict[RoundCategory, Optional[float]] = {cat: None for cat in RoundCategory}
    mismatches = {cat: 0 for cat in RoundCategory}
    for cat, pairs in sift_result.check_sets.items():
        qbers[cat] = qber(pairs)
        mismatches[cat] = sum(1 for e, o in pairs if e != o)

    raw_len = len(sift_result.raw_key_pairs)
    eve_pairs = [
        (rec.alice_bit, rec.eve_bit)
        for rec in records
        if rec.category is RoundCategory.SIFT_Z and rec.eve_bit is not None
    ]
    agreement = sum(1 for a, e in eve_pairs if a == e) / len(eve_pairs) if eve_pairs else None

    return RunReport(
        rounds=len(records),
        counts=counts,
        mismatches=mismatches,
        qber=qbers,
        raw_key_length=raw_len,
        sift_rate=raw_len / len(records),
        eve_agreement=agreement,
        eve_known_fraction=len(eve_pairs) / raw_len if raw_len else 0.0,
        mutual_information_bits=_eve_information(eve_pairs, raw_len),
        verdict=verdict(qbers, config.qber_threshold),
        threshold=config.qber_threshold,
    )
