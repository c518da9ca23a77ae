"""One-by-one advisor hiring driven by expected marginal value.

Every round draws a plausible accuracy for each unhired advisor from its
Beta record, prices the swing that advisor could cause in the running
answer probabilities, and hires the best candidate only while that
expected contribution exceeds the asking price. Hiring stops as soon as
nobody clears the bar, so cheap decisions get few (possibly zero)
advisors and valuable ones get many.

The contribution of a candidate is evaluated hypothetically on both
sides: once as if it joined the yes camp and once the no camp, each
weighted by the prior odds of that answer. Inside the hypothetical the
candidate contributes its sampled accuracy while already-hired advisors
contribute their stored trustworthiness; real decisions after hiring
always use stored trustworthiness only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from maddm.answers import AnswerSet
from maddm.ensemble import UNIFORM_PRIOR, PriorOdds
from maddm.trust import TAU_EPS, TrustVector, clamp_trust, uncertainty

# Per-decision oracle: advisor id -> answer in {-1, 1}. The answer is only
# requested once the advisor has been hired.
AnswerOracle = Callable[[int], int]


@dataclass(frozen=True)
class DecisionValue:
    """What one decision is worth: profit if right, loss paid if wrong."""

    profit: float
    loss: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.profit) and math.isfinite(self.loss)):
            raise ValueError("decision values must be finite")
        if self.profit < 0.0 or self.loss < 0.0:
            raise ValueError("decision values must be non-negative")

    @property
    def total(self) -> float:
        return self.profit + self.loss


@dataclass(frozen=True)
class AdvisorOffer:
    """An advisor available for hire at a fixed price."""

    id: int
    cost: float

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("advisor ids must be non-negative")
        if not math.isfinite(self.cost) or self.cost < 0.0:
            raise ValueError("advisor cost must be finite and non-negative")


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of the hiring loop for one decision.

    ``rounds`` counts utility sweeps over the remaining pool, i.e. the
    number of hires plus the final sweep that failed to clear the bar
    (unless the pool was exhausted first). ``hired`` preserves hire order.
    """

    answers: AnswerSet
    total_cost: float
    rounds: int
    hired: tuple[int, ...]


class _EnsembleSums:
    """Running sufficient statistics of the hired set's ensemble.

    Keeps the log-likelihood sums, trust-mass sums and uncertainty mass
    of the current answer set so both the real probabilities and the
    per-candidate hypotheticals are O(1) per advisor.
    """

    __slots__ = ("log_pos", "log_neg", "tau_pos", "tau_neg", "theta", "count")

    def __init__(self) -> None:
        self.log_pos = 0.0  # sum of log-likelihood factors given answer yes
        self.log_neg = 0.0  # ... given answer no
        self.tau_pos = 0.0
        self.tau_neg = 0.0
        self.theta = 0.0
        self.count = 0

    def add(self, tau: float, theta: float, answer: int) -> None:
        clamped = clamp_trust(tau)
        if answer == 1:
            self.log_pos += math.log(clamped)
            self.log_neg += math.log1p(-clamped)
            self.tau_pos += tau
        else:
            self.log_pos += math.log1p(-clamped)
            self.log_neg += math.log(clamped)
            self.tau_neg += tau
        self.theta += theta
        self.count += 1

    def probabilities(self, prior: PriorOdds) -> tuple[float, float]:
        """Current ensemble (p_yes, p_no); (0.5, 0.5) for an empty set."""
        if self.count == 0:
            return 0.5, 0.5
        log_plus = math.log(prior.p_plus) + self.log_pos
        log_minus = math.log(prior.p_minus) + self.log_neg
        shift = max(log_plus, log_minus)
        e_plus = math.exp(log_plus - shift)
        e_minus = math.exp(log_minus - shift)
        bayes_plus = e_plus / (e_plus + e_minus)
        bayes_minus = e_minus / (e_plus + e_minus)
        mass = self.tau_pos + self.tau_neg
        theta_bar = self.theta / self.count
        p_plus = (1.0 - theta_bar) * bayes_plus + theta_bar * (self.tau_pos / mass)
        p_minus = (1.0 - theta_bar) * bayes_minus + theta_bar * (self.tau_neg / mass)
        return p_plus, p_minus


def _hypothetical_gain(
    sampled_trust,
    candidate_theta,
    sums: _EnsembleSums,
    pe_plus: float,
    pe_minus: float,
    value: DecisionValue,
    prior: PriorOdds,
):
    """Expected contribution of candidates with the given sampled accuracies.

    Broadcasts over numpy arrays, so one call scores a whole pool sweep.
    The candidate's sampled accuracy enters both the likelihood and the
    vote mass; its stored uncertainty enters the mixing weight.
    """
    tau = np.asarray(sampled_trust, dtype=np.float64)
    # Clamped everywhere it is used so a saturated draw cannot produce
    # log(0) or an empty 0/0 vote.
    clamped = np.clip(tau, TAU_EPS, 1.0 - TAU_EPS)
    log_tau = np.log(clamped)
    log_one_minus = np.log1p(-clamped)

    theta_bar = (sums.theta + candidate_theta) / (sums.count + 1.0)
    bayes_weight = 1.0 - theta_bar
    log_plus_base = math.log(prior.p_plus) + sums.log_pos
    log_minus_base = math.log(prior.p_minus) + sums.log_neg
    vote_mass = sums.tau_pos + sums.tau_neg + clamped

    # Candidate joins the yes camp.
    lp = log_plus_base + log_tau
    lm = log_minus_base + log_one_minus
    shift = np.maximum(lp, lm)
    e_plus = np.exp(lp - shift)
    e_minus = np.exp(lm - shift)
    bayes_plus = e_plus / (e_plus + e_minus)
    vote_plus = (sums.tau_pos + clamped) / vote_mass
    hyp_plus = bayes_weight * bayes_plus + theta_bar * vote_plus
    gain_plus = prior.p_plus * np.abs(hyp_plus - pe_plus) * value.total

    # Candidate joins the no camp.
    lp = log_plus_base + log_one_minus
    lm = log_minus_base + log_tau
    shift = np.maximum(lp, lm)
    e_plus = np.exp(lp - shift)
    e_minus = np.exp(lm - shift)
    bayes_minus = e_minus / (e_plus + e_minus)
    vote_minus = (sums.tau_neg + clamped) / vote_mass
    hyp_minus = bayes_weight * bayes_minus + theta_bar * vote_minus
    gain_minus = prior.p_minus * np.abs(hyp_minus - pe_minus) * value.total

    return (2.0 * tau - 1.0) * (gain_plus + gain_minus)


def _sums_from_answer_set(answers: AnswerSet, trust: TrustVector) -> _EnsembleSums:
    sums = _EnsembleSums()
    alpha, beta = trust.alpha, trust.beta
    for i in sorted(answers.positives):
        total = float(alpha[i] + beta[i])
        sums.add(float(alpha[i]) / total, 2.0 / total, 1)
    for j in sorted(answers.negatives):
        total = float(alpha[j] + beta[j])
        sums.add(float(alpha[j]) / total, 2.0 / total, -1)
    return sums


def marginal_contribution(
    candidate: AdvisorOffer,
    sampled_trust: float,
    current: AnswerSet,
    trust: TrustVector,
    value: DecisionValue,
    prior: PriorOdds = UNIFORM_PRIOR,
) -> float:
    """Expected value swing if ``candidate`` joined the current answer set.

    ``sampled_trust`` is the candidate's Thompson draw for this round. A
    candidate with a draw of exactly 0.5 contributes nothing; draws below
    0.5 price the contribution negative. May exceed neither
    ``value.total`` nor be meaningful for an advisor already consulted.
    """
    if candidate.id in current.members:
        raise ValueError(f"advisor {candidate.id} is already part of the answer set")
    if candidate.id >= len(trust):
        raise ValueError(f"advisor {candidate.id} is not covered by the trust vector")
    sums = _sums_from_answer_set(current, trust)
    pe_plus, pe_minus = sums.probabilities(prior)
    theta_cand = uncertainty(trust[candidate.id])
    return float(
        _hypothetical_gain(sampled_trust, theta_cand, sums, pe_plus, pe_minus, value, prior)
    )


def select_advisors(
    value: DecisionValue,
    pool: Sequence[AdvisorOffer],
    trust: TrustVector,
    prior: PriorOdds = UNIFORM_PRIOR,
    oracle: AnswerOracle | None = None,
    rng: np.random.Generator | None = None,
) -> SelectionOutcome:
    """Hire advisors one at a time while somebody's utility stays positive.

    Parameters
    ----------
    value : DecisionValue
        Stakes of the decision being answered.
    pool : sequence of AdvisorOffer
        Available advisors with their prices; ids must be unique and
        covered by ``trust``.
    trust : TrustVector
        Current evidence; supplies both the Thompson posteriors and the
        stored trustworthiness used for the realized answer set.
    prior : PriorOdds
        Prior odds of the two answers.
    oracle : callable
        Maps advisor id to its answer; consulted only on hire.
    rng : numpy Generator
        Source for the Thompson draws; fresh draws every round.

    Returns
    -------
    SelectionOutcome
        Possibly-empty answer set, the exact cost paid, sweep count, and
        the hire order.
    """
    offers = list(pool)
    if not offers:
        raise ValueError("advisor pool must be non-empty")
    if oracle is None or rng is None:
        raise ValueError("select_advisors requires an answer oracle and an rng")
    ids = np.array([offer.id for offer in offers], dtype=np.intp)
    if len(set(ids.tolist())) != len(offers):
        raise ValueError("advisor pool contains duplicate ids")
    if int(ids.max()) >= len(trust):
        raise ValueError("pool references advisors outside the trust vector")
    costs = np.array([offer.cost for offer in offers], dtype=np.float64)
    alpha = trust.alpha[ids]
    beta = trust.beta[ids]
    totals = alpha + beta
    stored_tau = alpha / totals
    theta = 2.0 / totals

    remaining = list(range(len(offers)))
    sums = _EnsembleSums()
    pe_plus, pe_minus = 0.5, 0.5
    positives: list[int] = []
    negatives: list[int] = []
    hired: list[int] = []
    total_cost = 0.0
    rounds = 0

    while remaining:
        rounds += 1
        live = np.asarray(remaining, dtype=np.intp)
        draws = rng.beta(alpha[live], beta[live])
        contribution = _hypothetical_gain(
            draws, theta[live], sums, pe_plus, pe_minus, value, prior
        )
        utilities = contribution - costs[live]
        best = int(np.argmax(utilities))
        if not utilities[best] > 0.0:
            break
        position = remaining.pop(best)
        advisor_id = int(ids[position])
        total_cost += float(costs[position])
        answer = int(oracle(advisor_id))
        if answer not in (-1, 1):
            raise ValueError(f"oracle returned {answer!r} for advisor {advisor_id}")
        hired.append(advisor_id)
        (positives if answer == 1 else negatives).append(advisor_id)
        sums.add(float(stored_tau[position]), float(theta[position]), answer)
        pe_plus, pe_minus = sums.probabilities(prior)

    return SelectionOutcome(
        answers=AnswerSet(frozenset(positives), frozenset(negatives)),
        total_cost=total_cost,
        rounds=rounds,
        hired=tuple(hired),
    )


def sample_answer(hidden_accuracy: float, truth: int, rng: np.random.Generator) -> int:
    """Simulate one advisor answer: the truth with the given probability."""
    if not (0.0 <= hidden_accuracy <= 1.0):
        raise ValueError("hidden accuracy must lie in [0, 1]")
    if truth not in (-1, 1):
        raise ValueError("truth must be -1 or 1")
    return truth if rng.random() < hidden_accuracy else -truth


class AnswerMemo:
    """Caches simulated answers so repeated queries agree.

    One advisor asked twice about the same decision must give the same
    answer; the memo draws lazily on first query and replays thereafter.
    """

    def __init__(self) -> None:
        self._cache: dict[tuple[int, int], int] = {}

    def __len__(self) -> int:
        return len(self._cache)

    def query(
        self,
        advisor: int,
        decision: int,
        hidden_accuracy: float,
        truth: int,
        rng: np.random.Generator,
    ) -> int:
        key = (advisor, decision)
        answer = self._cache.get(key)
        if answer is None:
            answer = sample_answer(hidden_accuracy, truth, rng)
            self._cache[key] = answer
        return answer
