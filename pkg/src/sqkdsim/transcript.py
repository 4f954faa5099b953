"""Classical transcript records produced by protocol rounds."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .channel import Mode
from .quantum import Basis


class RoundCategory(enum.Enum):
    CTRL_Z = "CTRL_Z"
    CTRL_X = "CTRL_X"
    SIFT_Z = "SIFT_Z"
    SIFT_X = "SIFT_X"

    @classmethod
    def of(cls, mode: Mode, basis: Basis) -> RoundCategory:
        return _CATEGORY[mode, basis]


_CATEGORY = {
    (Mode.CTRL, Basis.Z): RoundCategory.CTRL_Z,
    (Mode.CTRL, Basis.X): RoundCategory.CTRL_X,
    (Mode.SIFT, Basis.Z): RoundCategory.SIFT_Z,
    (Mode.SIFT, Basis.X): RoundCategory.SIFT_X,
}

# Categories whose check pairs feed the abort decision.
CHECK_CATEGORIES = (RoundCategory.CTRL_Z, RoundCategory.CTRL_X, RoundCategory.SIFT_Z)


@dataclass(frozen=True, slots=True)
class RoundRecord:
    """Everything said and measured in one round.

    ``disclosed`` marks SIFT_Z rounds whose key bit is revealed publicly to
    estimate the error rate; those bits stay in the raw key statistics.
    """

    round_id: int
    alice_basis: Basis
    alice_bit: int
    mode: Mode
    bob_bit: Optional[int] = None
    alice_return_bit: Optional[int] = None
    eve_bit: Optional[int] = None
    eve_classified_mode: Optional[Mode] = None
    disclosed: bool = False

    def __post_init__(self):
        if (self.bob_bit is not None) != (self.mode is Mode.SIFT):
            raise ValueError("bob_bit must be present exactly for SIFT rounds")

    @property
    def category(self) -> RoundCategory:
        if self.mode is Mode.CTRL:
            return RoundCategory.CTRL_Z if self.alice_basis is Basis.Z else RoundCategory.CTRL_X
        return RoundCategory.SIFT_Z if self.alice_basis is Basis.Z else RoundCategory.SIFT_X

    def to_dict(self) -> dict:
        return {
            "round_id": self.round_id,
            "alice_basis": self.alice_basis.value,
            "alice_bit": self.alice_bit,
            "mode": self.mode.value,
            "bob_bit": self.bob_bit,
            "alice_return_bit": self.alice_return_bit,
            "eve_bit": self.eve_bit,
            "eve_classified_mode": self.eve_classified_mode.value if self.eve_classified_mode else None,
            "disclosed": self.disclosed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RoundRecord:
        mode = data.get("eve_classified_mode")
        return cls(
            round_id=data["round_id"],
            alice_basis=Basis(data["alice_basis"]),
            alice_bit=data["alice_bit"],
            mode=Mode(data["mode"]),
            bob_bit=data.get("bob_bit"),
            alice_return_bit=data.get("alice_return_bit"),
            eve_bit=data.get("eve_bit"),
            eve_classified_mode=Mode(mode) if mode else None,
            disclosed=data.get("disclosed", False),
        )


@dataclass
class SiftResult:
    """Raw key and per-category check pairs after public discussion.

    ``raw_key_pairs`` holds ``(alice_bit, bob_bit)`` for every SIFT_Z round,
    with ``raw_key_disclosed`` flagging the pairs revealed for checking.
    ``check_sets`` maps each check category to ``(expected, observed)`` pairs.
    """

    raw_key_pairs: list[tuple[int, int]] = field(default_factory=list)
    raw_key_disclosed: list[bool] = field(default_factory=list)
    raw_key_rounds: list[int] = field(default_factory=list)
    check_sets: dict[RoundCategory, list[tuple[int, int]]] = field(
        default_factory=lambda: {c: [] for c in CHECK_CATEGORIES}
    )
