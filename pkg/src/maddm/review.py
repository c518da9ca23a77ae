"""Retrospective recalibration of the trust records.

Early trust estimates are built from early, unreliable decisions. Once
more evidence exists, re-deciding every stored answer set with the
current trustworthiness yields better confidence weights, and better
weights yield better trust. The review loop iterates that feedback until
the trust vector stops moving.

Two pass semantics are provided:

* ``rebuild`` (default): every pass re-decides the whole history with
  the trust vector as of the pass start and rebuilds each record as
  prior + that pass's evidence. Evidence mass stays proportional to the
  history length, so the loop contracts to a fixed point.
* ``accumulate``: every pass keeps stacking new evidence on top of the
  existing records, updating the trust vector decision by decision
  within the pass. Kept for comparison; total evidence grows with every
  pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from maddm.answers import AnswerSet
from maddm.ensemble import UNIFORM_PRIOR, PriorOdds
from maddm.trust import TAU_EPS, TrustVector


class DecisionHistory:
    """Append-only log of (decision id, answer set) pairs.

    Flattened copies of the member ids and vote signs are kept in
    growable arrays so a review pass can score the entire history with
    array operations instead of walking Python sets.
    """

    def __init__(self) -> None:
        self._ids: list[int] = []
        self._sets: list[AnswerSet] = []
        self._seen: set[int] = set()
        self._flat_ids = np.empty(64, dtype=np.intp)
        self._flat_signs = np.empty(64, dtype=np.int8)
        self._flat_len = 0
        self._starts: list[int] = [0]
        self._max_advisor = -1

    def __len__(self) -> int:
        return len(self._ids)

    def __iter__(self) -> Iterator[tuple[int, AnswerSet]]:
        return iter(self.entries())

    def entries(self) -> tuple[tuple[int, AnswerSet], ...]:
        return tuple(zip(self._ids, self._sets))

    @property
    def max_advisor_id(self) -> int:
        return self._max_advisor

    def append(self, decision_id: int, answers: AnswerSet) -> None:
        if decision_id in self._seen:
            raise ValueError(f"decision {decision_id} already recorded")
        if answers.is_empty:
            raise ValueError("cannot record an empty answer set")
        members = sorted(answers.members)
        signs = [1 if m in answers.positives else -1 for m in members]
        self._reserve(len(members))
        end = self._flat_len + len(members)
        self._flat_ids[self._flat_len : end] = members
        self._flat_signs[self._flat_len : end] = signs
        self._flat_len = end
        self._starts.append(end)
        self._ids.append(decision_id)
        self._sets.append(answers)
        self._seen.add(decision_id)
        self._max_advisor = max(self._max_advisor, max(members))

    def _reserve(self, extra: int) -> None:
        needed = self._flat_len + extra
        if needed <= self._flat_ids.size:
            return
        capacity = self._flat_ids.size
        while capacity < needed:
            capacity *= 2
        ids = np.empty(capacity, dtype=np.intp)
        signs = np.empty(capacity, dtype=np.int8)
        ids[: self._flat_len] = self._flat_ids[: self._flat_len]
        signs[: self._flat_len] = self._flat_signs[: self._flat_len]
        self._flat_ids = ids
        self._flat_signs = signs

    def flat_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(member ids, vote signs, segment starts incl. end sentinel)."""
        ids = self._flat_ids[: self._flat_len]
        signs = self._flat_signs[: self._flat_len]
        starts = np.asarray(self._starts, dtype=np.intp)
        return ids, signs, starts


@dataclass(frozen=True)
class ReviewConfig:
    """Stopping rule and cadence of the review loop.

    ``threshold`` bounds the L1 movement of the trustworthiness vector
    per pass; ``frequency`` is how many decisions pass between reviews
    when a run drives the loop.
    """

    threshold: float = 1e-3
    max_passes: int = 100
    frequency: int = 1
    mode: str = "rebuild"

    def __post_init__(self) -> None:
        if not (self.threshold > 0.0):
            raise ValueError("threshold must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")
        if self.frequency < 1:
            raise ValueError("frequency must be at least 1")
        if self.mode not in ("rebuild", "accumulate"):
            raise ValueError(f"mode must be 'rebuild' or 'accumulate', got {self.mode!r}")


@dataclass(frozen=True)
class ReviewOutcome:
    """Recalibrated trust plus the loop's stopping diagnostics."""

    trust: TrustVector
    passes: int
    delta_tau: float

    @property
    def diagnostics(self) -> dict:
        return {"passes_used": self.passes, "final_delta_tau": self.delta_tau}


def _decide_all(
    ids: np.ndarray,
    signs: np.ndarray,
    starts: np.ndarray,
    alpha: np.ndarray,
    beta: np.ndarray,
    prior: PriorOdds,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ensemble decision over every stored answer set.

    Returns the per-decision answers and confidences under the given
    evidence arrays. Mirrors the scalar path in maddm.ensemble.
    """
    totals = alpha + beta
    tau = alpha / totals
    theta = 2.0 / totals
    clamped = np.clip(tau, TAU_EPS, 1.0 - TAU_EPS)

    member_tau = tau[ids]
    member_clamped = clamped[ids]
    member_theta = theta[ids]
    positive = signs > 0
    log_tau = np.log(member_clamped)
    log_one_minus = np.log1p(-member_clamped)
    like_plus = np.where(positive, log_tau, log_one_minus)
    like_minus = np.where(positive, log_one_minus, log_tau)

    seg = starts[:-1]
    sizes = np.diff(starts)
    log_plus = np.add.reduceat(like_plus, seg) + math.log(prior.p_plus)
    log_minus = np.add.reduceat(like_minus, seg) + math.log(prior.p_minus)
    shift = np.maximum(log_plus, log_minus)
    e_plus = np.exp(log_plus - shift)
    e_minus = np.exp(log_minus - shift)
    total = e_plus + e_minus
    bayes_plus = e_plus / total
    bayes_minus = e_minus / total

    theta_bar = np.add.reduceat(member_theta, seg) / sizes
    mass_plus = np.add.reduceat(np.where(positive, member_tau, 0.0), seg)
    mass_minus = np.add.reduceat(np.where(positive, 0.0, member_tau), seg)
    mass = mass_plus + mass_minus
    p_plus = (1.0 - theta_bar) * bayes_plus + theta_bar * (mass_plus / mass)
    p_minus = (1.0 - theta_bar) * bayes_minus + theta_bar * (mass_minus / mass)

    answers = np.where(p_plus > p_minus, 1, -1).astype(np.int8)
    confidence = np.abs(p_plus - p_minus)
    return answers, confidence


def _rebuild_pass(
    ids: np.ndarray,
    signs: np.ndarray,
    starts: np.ndarray,
    alpha: np.ndarray,
    beta: np.ndarray,
    prior: PriorOdds,
) -> tuple[np.ndarray, np.ndarray]:
    """One rebuild pass: prior + evidence from re-deciding the history."""
    answers, confidence = _decide_all(ids, signs, starts, alpha, beta, prior)
    sizes = np.diff(starts)
    per_member_answer = np.repeat(answers, sizes)
    per_member_conf = np.repeat(confidence, sizes)
    agree = signs == per_member_answer
    n = alpha.size
    new_alpha = 1.0 + np.bincount(ids[agree], weights=per_member_conf[agree], minlength=n)
    new_beta = 1.0 + np.bincount(ids[~agree], weights=per_member_conf[~agree], minlength=n)
    return new_alpha, new_beta


def _accumulate_pass(
    history: DecisionHistory,
    alpha: np.ndarray,
    beta: np.ndarray,
    prior: PriorOdds,
) -> None:
    """One literal pass: update the records in place after each decision."""
    ids, signs, starts = history.flat_arrays()
    for k in range(len(history)):
        seg_ids = ids[starts[k] : starts[k + 1]]
        seg_signs = signs[starts[k] : starts[k + 1]]
        answers, confidence = _decide_all(
            seg_ids, seg_signs, np.array([0, seg_ids.size], dtype=np.intp), alpha, beta, prior
        )
        agree = seg_signs == answers[0]
        np.add.at(alpha, seg_ids[agree], confidence[0])
        np.add.at(beta, seg_ids[~agree], confidence[0])


def review_update(
    history: DecisionHistory,
    trust: TrustVector,
    config: ReviewConfig = ReviewConfig(),
    prior: PriorOdds = UNIFORM_PRIOR,
) -> ReviewOutcome:
    """Re-decide the past until the trust vector settles.

    Each pass re-evaluates every stored answer set and derives new
    evidence from the resulting confidences; the loop stops once the L1
    change of the trustworthiness vector over a full pass drops to the
    configured threshold, or after ``max_passes``. The stored answer
    sets themselves are never modified.
    """
    if history.max_advisor_id >= len(trust):
        raise ValueError(
            f"history references advisor {history.max_advisor_id} outside the trust vector"
        )
    if len(history) == 0:
        return ReviewOutcome(trust=trust, passes=0, delta_tau=0.0)

    ids, signs, starts = history.flat_arrays()
    alpha = trust.alpha.copy()
    beta = trust.beta.copy()
    passes = 0
    delta = math.inf
    while passes < config.max_passes:
        tau_before = alpha / (alpha + beta)
        if config.mode == "rebuild":
            alpha, beta = _rebuild_pass(ids, signs, starts, alpha, beta, prior)
        else:
            _accumulate_pass(history, alpha, beta, prior)
        passes += 1
        tau_after = alpha / (alpha + beta)
        delta = float(np.abs(tau_after - tau_before).sum())
        if delta <= config.threshold:
            break
    return ReviewOutcome(trust=TrustVector(alpha, beta), passes=passes, delta_tau=delta)
