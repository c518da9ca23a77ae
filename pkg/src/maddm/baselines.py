"""Comparison decision methods and the aggregation machinery they share.

Four methods:

* ``fna``: hire a fixed number of advisors per decision.
* ``bc``: hire greedily under a per-decision budget, a fixed fraction of
  the decision's stakes.
* ``rv``: hire a few advisors uniformly at random and take the majority.
* ``bu``: the perfect-information bound (every answer right, no fees).

``fna`` and ``bc`` rank candidates with a bandit strategy (epsilon-greedy,
UCB, or Thompson sampling) applied through one of two criteria: raw
estimated trustworthiness, or cost effectiveness, the price paid per unit
of above-chance accuracy. Their answers are aggregated by a two-class EM
that jointly re-estimates advisor accuracies and per-decision posteriors
from the whole answer history, since no ground truth ever arrives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from maddm.answers import AnswerSet
from maddm.environment import Environment
from maddm.results import RunResult
from maddm.selection import AdvisorOffer
from maddm.trust import TrustVector, apply_confidence_update

_STRATEGIES = ("epsilon_greedy", "ucb", "thompson")
_CRITERIA = ("trustworthiness", "cost_effectiveness")
_METHODS = ("fna", "bc", "rv", "bu")


@dataclass(frozen=True)
class StrategyConfig:
    """How fna/bc explore advisors and rank them for hire."""

    kind: str = "epsilon_greedy"
    epsilon: float = 0.1
    criterion: str = "cost_effectiveness"

    def __post_init__(self) -> None:
        if self.kind not in _STRATEGIES:
            raise ValueError(f"strategy kind must be one of {_STRATEGIES}, got {self.kind!r}")
        if self.criterion not in _CRITERIA:
            raise ValueError(f"criterion must be one of {_CRITERIA}, got {self.criterion!r}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class BaselineConfig:
    """Method choice plus its hiring hyper-parameters."""

    method: str
    fna_k: int = 5
    bc_budget_fraction: float = 0.10
    rv_k: int = 3
    exploration_first_rounds: int = 10

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.fna_k < 1 or self.rv_k < 1:
            raise ValueError("advisor counts must be at least 1")
        if not (0.0 < self.bc_budget_fraction <= 1.0):
            raise ValueError("budget fraction must lie in (0, 1]")
        if self.exploration_first_rounds < 0:
            raise ValueError("exploration-first round count must be non-negative")


def cost_effectiveness(offer: AdvisorOffer, trust_estimate: float) -> float:
    """Price per unit of above-chance accuracy; lower is better.

    An advisor at or below coin-flip accuracy buys nothing, so its score
    is positive infinity (never preferred).
    """
    if trust_estimate <= 0.5:
        return math.inf
    return offer.cost / (trust_estimate - 0.5)


def _criterion_scores(
    offers: Sequence[AdvisorOffer],
    estimates: np.ndarray,
    criterion: str,
) -> np.ndarray:
    """Lower-is-better hire scores for each pool position."""
    if criterion == "trustworthiness":
        return -np.asarray(estimates, dtype=np.float64)
    return np.array(
        [cost_effectiveness(offer, float(est)) for offer, est in zip(offers, estimates)]
    )


def _selection_order(
    offers: Sequence[AdvisorOffer],
    trust: TrustVector,
    strategy: StrategyConfig,
    rng: np.random.Generator,
    point_estimates: np.ndarray | None,
    decisions_elapsed: int,
) -> list[int]:
    """Pool positions in hire-preference order for one decision.

    epsilon-greedy walks the criterion ranking but replaces each slot
    with a uniform pick at rate epsilon. UCB and Thompson rank once per
    decision, feeding their optimistic index or posterior draw through
    the criterion in place of the point estimate. Score ties break
    toward the lower advisor id.
    """
    ids = np.array([offer.id for offer in offers], dtype=np.intp)
    if point_estimates is None:
        estimates = trust.trustworthiness()[ids]
    else:
        estimates = np.asarray(point_estimates, dtype=np.float64)[ids]

    if strategy.kind == "ucb":
        pulls = trust.alpha[ids] + trust.beta[ids] - 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            bonus = np.sqrt(2.0 * math.log(max(decisions_elapsed, 1)) / pulls)
        ranked_estimates = np.where(pulls > 0.0, estimates + bonus, math.inf)
        scores = _criterion_scores(offers, ranked_estimates, strategy.criterion)
        return list(np.lexsort((ids, scores)))
    if strategy.kind == "thompson":
        draws = rng.beta(trust.alpha[ids], trust.beta[ids])
        scores = _criterion_scores(offers, draws, strategy.criterion)
        return list(np.lexsort((ids, scores)))

    # epsilon-greedy: precompute the greedy queue, then fill slots
    scores = _criterion_scores(offers, estimates, strategy.criterion)
    greedy_queue = list(np.lexsort((ids, scores)))
    remaining = set(greedy_queue)
    order: list[int] = []
    for _ in range(len(offers)):
        if strategy.epsilon > 0.0 and rng.random() < strategy.epsilon:
            pick = sorted(remaining)[rng.integers(len(remaining))]
        else:
            pick = next(pos for pos in greedy_queue if pos in remaining)
        order.append(pick)
        remaining.remove(pick)
    return order


def select_fixed_number(
    pool: Sequence[AdvisorOffer],
    trust: TrustVector,
    strategy: StrategyConfig,
    k: int,
    rng: np.random.Generator,
    point_estimates: np.ndarray | None = None,
    decisions_elapsed: int = 0,
) -> list[int]:
    """Ids of exactly ``k`` distinct advisors, in hire-preference order."""
    if k > len(pool):
        raise ValueError(f"cannot select {k} advisors from a pool of {len(pool)}")
    order = _selection_order(pool, trust, strategy, rng, point_estimates, decisions_elapsed)
    return [pool[pos].id for pos in order[:k]]


def select_budget_constrained(
    pool: Sequence[AdvisorOffer],
    trust: TrustVector,
    strategy: StrategyConfig,
    budget: float,
    rng: np.random.Generator,
    point_estimates: np.ndarray | None = None,
    decisions_elapsed: int = 0,
) -> list[int]:
    """Walk the preference order, hiring while the next pick still fits.

    Stops at the first advisor that would overshoot the budget; it does
    not skip ahead to cheaper, lower-ranked candidates.
    """
    if budget < 0.0:
        raise ValueError("budget must be non-negative")
    order = _selection_order(pool, trust, strategy, rng, point_estimates, decisions_elapsed)
    chosen: list[int] = []
    spent = 0.0
    for pos in order:
        cost = pool[pos].cost
        if spent + cost > budget:
            break
        chosen.append(pool[pos].id)
        spent += cost
    return chosen


@dataclass
class EmState:
    """Converged EM beliefs: advisor accuracies and decision posteriors."""

    accuracies: np.ndarray
    posteriors: np.ndarray  # per observed decision: probability the answer is yes


class EmAggregator:
    """Two-class EM over the growing answer history.

    E step: per-decision posterior of the positive answer under
    independent advisor errors and a uniform answer prior. M step:
    per-advisor accuracy as the smoothed expected fraction of matching
    answers (add-one on both sides, so estimates stay inside (0, 1));
    advisors with no recorded answers keep their current estimate.

    Starting accuracies sit slightly above one half: the perfectly
    symmetric value is a fixed point of the updates and would never move.

    The instance is incremental: observe answer sets as decisions
    happen, call :meth:`infer` to re-converge; accuracies warm-start
    from the previous call.
    """

    def __init__(
        self,
        n_advisors: int,
        init_accuracy: float = 0.6,
        tol: float = 1e-6,
        max_iterations: int = 100,
    ) -> None:
        if not (0.0 < init_accuracy < 1.0):
            raise ValueError("initial accuracy must lie strictly inside (0, 1)")
        if n_advisors < 1:
            raise ValueError("need at least one advisor")
        self.n_advisors = n_advisors
        self.tol = tol
        self.max_iterations = max_iterations
        self.accuracies = np.full(n_advisors, float(init_accuracy))
        self._flat_ids: list[int] = []
        self._flat_signs: list[int] = []
        self._starts: list[int] = [0]
        self.posterior_plus = np.empty(0)
        self.posterior_minus = np.empty(0)

    @property
    def n_decisions(self) -> int:
        return len(self._starts) - 1

    def observe(self, answers: AnswerSet) -> None:
        if answers.is_empty:
            raise ValueError("cannot observe an empty answer set")
        # id-sorted layout keeps the likelihood sums order-identical under
        # a label flip, which makes the flip symmetry bit-exact
        members = sorted(answers.members)
        if members[-1] >= self.n_advisors:
            raise ValueError("answer set references advisors outside the pool")
        self._flat_ids.extend(members)
        self._flat_signs.extend(1 if m in answers.positives else -1 for m in members)
        self._starts.append(len(self._flat_ids))

    def infer(self, track_objective: bool = False) -> list[float]:
        """Run EM to convergence; returns the tracked objective if asked.

        The tracked objective is the smoothing-penalized observed-data
        log likelihood, which every full EM cycle is guaranteed not to
        decrease.
        """
        if not self._flat_ids:
            raise ValueError("nothing observed yet")
        ids = np.asarray(self._flat_ids, dtype=np.intp)
        signs = np.asarray(self._flat_signs, dtype=np.int8)
        starts = np.asarray(self._starts, dtype=np.intp)
        seg = starts[:-1]
        positive = signs > 0
        counts = np.bincount(ids, minlength=self.n_advisors)
        consulted = counts > 0
        log_half = math.log(0.5)

        acc = self.accuracies
        q_plus = q_minus = None
        objective: list[float] = []
        for _ in range(self.max_iterations):
            member_acc = acc[ids]
            log_acc = np.log(member_acc)
            log_err = np.log1p(-member_acc)
            like_plus = np.where(positive, log_acc, log_err)
            like_minus = np.where(positive, log_err, log_acc)
            log_plus = np.add.reduceat(like_plus, seg) + log_half
            log_minus = np.add.reduceat(like_minus, seg) + log_half
            shift = np.maximum(log_plus, log_minus)
            e_plus = np.exp(log_plus - shift)
            e_minus = np.exp(log_minus - shift)
            total = e_plus + e_minus
            new_q_plus = e_plus / total
            new_q_minus = e_minus / total
            if track_objective:
                penalty = float(np.sum(np.log(acc[consulted]) + np.log1p(-acc[consulted])))
                objective.append(float(np.sum(shift + np.log(total))) + penalty)

            if q_plus is not None:
                delta = max(
                    float(np.abs(new_q_plus - q_plus).max()),
                    float(np.abs(new_q_minus - q_minus).max()),
                )
                if delta < self.tol:
                    q_plus, q_minus = new_q_plus, new_q_minus
                    break
            q_plus, q_minus = new_q_plus, new_q_minus

            sizes = np.diff(starts)
            member_credit = np.where(
                positive, np.repeat(q_plus, sizes), np.repeat(q_minus, sizes)
            )
            credit = np.bincount(ids, weights=member_credit, minlength=self.n_advisors)
            acc = np.where(consulted, (credit + 1.0) / (counts + 2.0), acc)

        self.accuracies = acc
        self.posterior_plus = q_plus
        self.posterior_minus = q_minus
        return objective

    def state(self) -> EmState:
        return EmState(accuracies=self.accuracies.copy(), posteriors=self.posterior_plus.copy())


def em_aggregate(
    answer_sets: Sequence[AnswerSet],
    n_advisors: int,
    init: EmState | None = None,
    tol: float = 1e-6,
    max_iterations: int = 100,
) -> EmState:
    """One-shot EM over a batch of answer sets."""
    aggregator = EmAggregator(n_advisors, tol=tol, max_iterations=max_iterations)
    if init is not None:
        aggregator.accuracies = np.asarray(init.accuracies, dtype=np.float64).copy()
    observed = 0
    for answers in answer_sets:
        if not answers.is_empty:
            aggregator.observe(answers)
            observed += 1
    if observed == 0:
        raise ValueError("need at least one decision with at least one answer")
    aggregator.infer()
    return aggregator.state()


def run_baseline(
    config: BaselineConfig,
    strategy: StrategyConfig,
    environment: Environment,
    rng: np.random.Generator,
    exploration_first: bool = False,
    trace: bool = False,
) -> RunResult:
    """Play one baseline method through an entire environment.

    With ``exploration_first`` the whole pool is hired for the first
    ``config.exploration_first_rounds`` decisions to bootstrap the
    accuracy estimates before the method's own selection takes over.
    The perfect-information bound ``bu`` ignores advisors entirely.
    """
    decisions = environment.decisions
    n_advisors = environment.n_advisors

    if config.method == "bu":
        profits = [d.value.profit for d in decisions]
        rows = None
        if trace:
            rows = [
                {"decision_id": d.id, "rounds": 0, "hired": [], "advisors_polled": 0,
                 "total_cost": 0.0, "p_positive": 1.0, "answer": d.truth,
                 "confidence": 1.0, "correct": True}
                for d in decisions
            ]
        return RunResult(
            method="bu",
            utility=math.fsum(profits),
            correct_count=len(decisions),
            total_cost=0.0,
            n_decisions=len(decisions),
            trace=rows,
        )

    offers = environment.offers()
    all_ids = list(range(n_advisors))
    costs = np.array([offer.cost for offer in offers])
    ef_rounds = config.exploration_first_rounds if exploration_first else 0

    trust = TrustVector.fresh(n_advisors)
    aggregator = EmAggregator(n_advisors)
    values: list[float] = []
    fees: list[float] = []
    correct_count = 0
    rows: list[dict] | None = [] if trace else None

    for index, decision in enumerate(decisions):
        if index < ef_rounds:
            chosen = all_ids
        elif config.method == "rv":
            chosen = [int(i) for i in rng.choice(n_advisors, size=config.rv_k, replace=False)]
        elif config.method == "fna":
            chosen = select_fixed_number(
                offers, trust, strategy, config.fna_k, rng,
                point_estimates=aggregator.accuracies, decisions_elapsed=index,
            )
        else:  # bc
            budget = config.bc_budget_fraction * decision.value.total
            chosen = select_budget_constrained(
                offers, trust, strategy, budget, rng,
                point_estimates=aggregator.accuracies, decisions_elapsed=index,
            )

        paid = float(costs[chosen].sum()) if chosen else 0.0
        answers = environment.answer_set(decision.id, chosen)

        if config.method == "rv":
            vote = len(answers.positives) - len(answers.negatives)
            answer = 1 if vote > 0 else -1
            confidence = 1.0
            p_positive = float(answer == 1)
        elif answers.is_empty:
            # nobody affordable: commit to the default answer, learn nothing
            answer, confidence, p_positive = -1, 0.0, 0.5
        else:
            aggregator.observe(answers)
            aggregator.infer()
            q_plus = float(aggregator.posterior_plus[-1])
            q_minus = float(aggregator.posterior_minus[-1])
            answer = 1 if q_plus > q_minus else -1
            confidence = abs(q_plus - q_minus)
            p_positive = q_plus
            trust = apply_confidence_update(trust, answers, answer, confidence)

        correct = answer == decision.truth
        correct_count += int(correct)
        values.append(decision.value.profit if correct else -decision.value.loss)
        fees.append(paid)
        if rows is not None:
            rows.append(
                {"decision_id": decision.id, "rounds": 1, "hired": list(chosen),
                 "advisors_polled": len(chosen), "total_cost": paid,
                 "p_positive": p_positive, "answer": answer,
                 "confidence": confidence, "correct": correct}
            )

    return RunResult(
        method=config.method,
        utility=math.fsum(values) - math.fsum(fees),
        correct_count=correct_count,
        total_cost=math.fsum(fees),
        n_decisions=len(decisions),
        trace=rows,
    )
