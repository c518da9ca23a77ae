"""Partition of consulted advisors by the binary answer they gave."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


def _coerce_ids(ids: Iterable) -> frozenset[int]:
    out = set()
    for advisor_id in ids:
        value = int(advisor_id)
        if value != advisor_id or value < 0:
            raise ValueError(f"advisor ids must be non-negative ints, got {advisor_id!r}")
        out.add(value)
    return frozenset(out)


@dataclass(frozen=True)
class AnswerSet:
    """Advisors that answered yes (``positives``) and no (``negatives``).

    The two sides are disjoint by construction; their union is the full
    set of advisors consulted for one decision. An empty set is a legal
    value (nobody was hired) but most aggregation operations reject it.
    """

    positives: frozenset[int]
    negatives: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "positives", _coerce_ids(self.positives))
        object.__setattr__(self, "negatives", _coerce_ids(self.negatives))
        overlap = self.positives & self.negatives
        if overlap:
            raise ValueError(f"advisors {sorted(overlap)} appear on both sides of the answer set")

    @classmethod
    def empty(cls) -> "AnswerSet":
        return cls(frozenset(), frozenset())

    @classmethod
    def from_votes(cls, votes: Iterable[tuple[int, int]]) -> "AnswerSet":
        """Build from (advisor_id, answer) pairs with answers in {-1, 1}."""
        pos, neg = set(), set()
        for advisor_id, answer in votes:
            if answer == 1:
                pos.add(advisor_id)
            elif answer == -1:
                neg.add(advisor_id)
            else:
                raise ValueError(f"answers must be -1 or 1, got {answer!r}")
        return cls(frozenset(pos), frozenset(neg))

    @property
    def members(self) -> frozenset[int]:
        return self.positives | self.negatives

    @property
    def is_empty(self) -> bool:
        return not (self.positives or self.negatives)

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)
