"""Beta-evidence bookkeeping for advisor trustworthiness.

Each advisor carries two pseudo-counts: ``alpha`` accumulates evidence
that its past advice was correct, ``beta`` evidence that it was wrong.
Both start at 1, the uninformative Beta(1, 1) prior, and only ever grow.
Because the true answer is never observed, the decision loop adds
fractional confidence weights instead of hard 0/1 outcomes, so the
counts are real-valued.

Derived quantities:

* trustworthiness: the Beta mean ``alpha / (alpha + beta)``
* uncertainty: the epistemic mass ``2 / (alpha + beta)``, exactly 1 at
  the prior and shrinking toward 0 as evidence accumulates
* Thompson draws from ``Beta(alpha, beta)``, used to score candidates
  while still exploring advisors with little evidence
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from maddm.answers import AnswerSet

# Trust values are clamped only at the point where they enter likelihood
# products, never in storage, so a value of exactly 0 or 1 can neither
# zero out nor saturate a product downstream.
TAU_EPS = 1e-9


def clamp_trust(tau: float) -> float:
    """Clamp a trust value into [TAU_EPS, 1 - TAU_EPS] for likelihood use."""
    return min(max(tau, TAU_EPS), 1.0 - TAU_EPS)


@dataclass(frozen=True)
class TrustRecord:
    """Accumulated correctness evidence about a single advisor."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("evidence counts must be finite")
        if self.alpha < 1.0 or self.beta < 1.0:
            raise ValueError(
                f"evidence counts sit on top of the Beta(1, 1) prior; "
                f"got alpha={self.alpha}, beta={self.beta}"
            )


def new_trust_record() -> TrustRecord:
    """Prior record for an advisor nothing is known about."""
    return TrustRecord(1.0, 1.0)


def trustworthiness(record: TrustRecord) -> float:
    """Point estimate of the advisor's accuracy, strictly inside (0, 1)."""
    return record.alpha / (record.alpha + record.beta)


def uncertainty(record: TrustRecord) -> float:
    """Epistemic uncertainty in (0, 1]; strictly decreasing in total evidence."""
    return 2.0 / (record.alpha + record.beta)


def thompson_sample(record: TrustRecord, rng: np.random.Generator) -> float:
    """One plausible accuracy drawn from the record's Beta posterior."""
    return float(rng.beta(record.alpha, record.beta))


class TrustVector:
    """Trust records for a dense advisor pool, indexed by advisor id.

    Treated as an immutable value: updates return a new vector, and a
    vector is owned by exactly one run. The evidence lives in two parallel
    float arrays so the hot loops can operate on it without boxing.
    """

    __slots__ = ("alpha", "beta")

    def __init__(self, alpha: Sequence[float] | np.ndarray, beta: Sequence[float] | np.ndarray):
        a = np.ascontiguousarray(alpha, dtype=np.float64)
        b = np.ascontiguousarray(beta, dtype=np.float64)
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")
        if a.size and (not np.all(np.isfinite(a)) or not np.all(np.isfinite(b))):
            raise ValueError("evidence counts must be finite")
        if a.size and (a.min() < 1.0 or b.min() < 1.0):
            raise ValueError("evidence counts sit on top of the Beta(1, 1) prior")
        self.alpha = a
        self.beta = b

    @classmethod
    def fresh(cls, n_advisors: int) -> "TrustVector":
        """All-prior vector for a pool of ``n_advisors``."""
        if n_advisors < 0:
            raise ValueError("pool size must be non-negative")
        return cls(np.ones(n_advisors), np.ones(n_advisors))

    @classmethod
    def from_records(cls, records: Iterable[TrustRecord]) -> "TrustVector":
        recs = list(records)
        return cls([r.alpha for r in recs], [r.beta for r in recs])

    def __len__(self) -> int:
        return int(self.alpha.size)

    def __getitem__(self, advisor_id: int) -> TrustRecord:
        return TrustRecord(float(self.alpha[advisor_id]), float(self.beta[advisor_id]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrustVector):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha) and np.array_equal(self.beta, other.beta)

    def __repr__(self) -> str:
        return f"TrustVector(n={len(self)})"

    def records(self) -> tuple[TrustRecord, ...]:
        return tuple(self[i] for i in range(len(self)))

    def trustworthiness(self) -> np.ndarray:
        """Per-advisor accuracy point estimates."""
        return self.alpha / (self.alpha + self.beta)

    def uncertainty(self) -> np.ndarray:
        """Per-advisor epistemic uncertainty."""
        return 2.0 / (self.alpha + self.beta)

    def copy(self) -> "TrustVector":
        return TrustVector(self.alpha.copy(), self.beta.copy())

    def to_json(self) -> str:
        """Serialize as a JSON array of {"alpha": ..., "beta": ...} rows."""
        return json.dumps(
            [{"alpha": float(a), "beta": float(b)} for a, b in zip(self.alpha, self.beta)]
        )

    @classmethod
    def from_json(cls, text: str) -> "TrustVector":
        rows = json.loads(text)
        return cls([r["alpha"] for r in rows], [r["beta"] for r in rows])


def apply_confidence_update(
    trust: TrustVector,
    answers: AnswerSet,
    answer: int,
    confidence: float,
) -> TrustVector:
    """Credit every consulted advisor with fractional evidence.

    Advisors whose vote matches the aggregated ``answer`` gain
    ``confidence`` on their correct side, the others on their wrong side;
    advisors outside the answer set are untouched. Returns a new vector.
    """
    if answer not in (-1, 1):
        raise ValueError(f"answer must be -1 or 1, got {answer!r}")
    if not (0.0 <= confidence <= 1.0):
        raise ValueError(f"confidence must lie in [0, 1], got {confidence!r}")
    n = len(trust)
    unknown = [i for i in answers.members if i >= n]
    if unknown:
        raise ValueError(
            f"answer set references unknown advisor ids {sorted(unknown)}; "
            f"trust vector covers [0, {n})"
        )
    alpha = trust.alpha.copy()
    beta = trust.beta.copy()
    pos = sorted(answers.positives)
    neg = sorted(answers.negatives)
    if answer == 1:
        alpha[pos] += confidence
        beta[neg] += confidence
    else:
        beta[pos] += confidence
        alpha[neg] += confidence
    return TrustVector(alpha, beta)
