"""Fuse a set of binary advisor answers into one decision.

Two aggregators run side by side. The Bayesian route treats each
advisor's trustworthiness as the probability it answered correctly and
multiplies the implied likelihoods into a posterior over the two
answers. The weighted-voting route simply splits the advisors' summed
trustworthiness between the two camps. Their convex combination is
controlled by the answer set's average uncertainty: a fresh pool leans
entirely on the vote, a well-evidenced pool almost entirely on the
posterior.

The gap between the two final probabilities doubles as the confidence
weight that is fed back into the trust records, which is what lets the
whole loop run without ever observing ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from maddm.answers import AnswerSet
from maddm.trust import TrustVector, apply_confidence_update, clamp_trust


@dataclass(frozen=True)
class PriorOdds:
    """Prior probability that a decision's true answer is yes / no."""

    p_plus: float = 0.5
    p_minus: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.p_plus < 1.0 and 0.0 < self.p_minus < 1.0):
            raise ValueError("prior probabilities must lie strictly inside (0, 1)")
        if abs(self.p_plus + self.p_minus - 1.0) > 1e-12:
            raise ValueError("prior probabilities must sum to 1")


UNIFORM_PRIOR = PriorOdds()


@dataclass(frozen=True)
class EnsembleOutcome:
    """Final answer probabilities, the chosen answer, and its confidence."""

    p_positive: float
    p_negative: float
    answer: int
    confidence: float


def _require_members(answers: AnswerSet, op: str) -> None:
    if answers.is_empty:
        raise ValueError(f"{op} requires a non-empty answer set")


def _check_coverage(answers: AnswerSet, trust: TrustVector) -> None:
    n = len(trust)
    unknown = [i for i in answers.members if i >= n]
    if unknown:
        raise ValueError(
            f"answer set references unknown advisor ids {sorted(unknown)}; "
            f"trust vector covers [0, {n})"
        )


def bayesian_probabilities(
    answers: AnswerSet,
    trust: TrustVector,
    prior: PriorOdds = UNIFORM_PRIOR,
) -> tuple[float, float]:
    """Posterior (p_yes, p_no) from independent per-advisor likelihoods.

    The yes-likelihood multiplies tau over the yes camp and (1 - tau)
    over the no camp; the no-likelihood mirrors it. Products are carried
    in log space and normalized with the usual max-shift so that thirty
    near-0 or near-1 factors cannot underflow.
    """
    _require_members(answers, "bayesian_probabilities")
    _check_coverage(answers, trust)
    log_plus = math.log(prior.p_plus)
    log_minus = math.log(prior.p_minus)
    alpha, beta = trust.alpha, trust.beta
    for i in sorted(answers.positives):
        tau = clamp_trust(float(alpha[i]) / float(alpha[i] + beta[i]))
        log_plus += math.log(tau)
        log_minus += math.log1p(-tau)
    for j in sorted(answers.negatives):
        tau = clamp_trust(float(alpha[j]) / float(alpha[j] + beta[j]))
        log_plus += math.log1p(-tau)
        log_minus += math.log(tau)
    shift = max(log_plus, log_minus)
    e_plus = math.exp(log_plus - shift)
    e_minus = math.exp(log_minus - shift)
    total = e_plus + e_minus
    return e_plus / total, e_minus / total


def weighted_voting_probabilities(
    answers: AnswerSet,
    trust: TrustVector,
) -> tuple[float, float]:
    """(p_yes, p_no) as each camp's share of the summed trustworthiness."""
    _require_members(answers, "weighted_voting_probabilities")
    _check_coverage(answers, trust)
    alpha, beta = trust.alpha, trust.beta
    sum_pos = 0.0
    sum_neg = 0.0
    for i in sorted(answers.positives):
        sum_pos += float(alpha[i]) / float(alpha[i] + beta[i])
    for j in sorted(answers.negatives):
        sum_neg += float(alpha[j]) / float(alpha[j] + beta[j])
    total = sum_pos + sum_neg
    return sum_pos / total, sum_neg / total


def average_uncertainty(answers: AnswerSet, trust: TrustVector) -> float:
    """Mean epistemic uncertainty over the consulted advisors."""
    _require_members(answers, "average_uncertainty")
    _check_coverage(answers, trust)
    alpha, beta = trust.alpha, trust.beta
    total = 0.0
    for i in sorted(answers.members):
        total += 2.0 / float(alpha[i] + beta[i])
    return total / len(answers)


def ensemble_decide(
    answers: AnswerSet,
    trust: TrustVector,
    prior: PriorOdds = UNIFORM_PRIOR,
) -> EnsembleOutcome:
    """Mix the Bayesian posterior and the weighted vote into a decision.

    The mixing weight is the answer set's average uncertainty: the vote
    gets that weight, the posterior the remainder. A tie resolves to the
    negative answer with zero confidence.
    """
    _require_members(answers, "ensemble_decide")
    bayes_plus, bayes_minus = bayesian_probabilities(answers, trust, prior)
    vote_plus, vote_minus = weighted_voting_probabilities(answers, trust)
    theta_bar = average_uncertainty(answers, trust)
    p_plus = (1.0 - theta_bar) * bayes_plus + theta_bar * vote_plus
    p_minus = (1.0 - theta_bar) * bayes_minus + theta_bar * vote_minus
    answer = 1 if p_plus > p_minus else -1
    return EnsembleOutcome(
        p_positive=p_plus,
        p_negative=p_minus,
        answer=answer,
        confidence=abs(p_plus - p_minus),
    )


def decide_and_update(
    answers: AnswerSet,
    trust: TrustVector,
    prior: PriorOdds = UNIFORM_PRIOR,
) -> tuple[EnsembleOutcome, TrustVector]:
    """Decide, then feed the decision's confidence back into the records."""
    outcome = ensemble_decide(answers, trust, prior)
    updated = apply_confidence_update(trust, answers, outcome.answer, outcome.confidence)
    return outcome, updated
