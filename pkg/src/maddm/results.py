"""Per-run accounting shared by every decision method."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class RunResult:
    """Utility ledger of one method over one realized environment.

    ``utility`` is the summed per-decision value (profit when the
    committed answer was right, minus the loss when it was wrong) minus
    every advisor fee paid. ``trace`` optionally holds one dict per
    decision for debugging and audits.
    """

    method: str
    utility: float
    correct_count: int
    total_cost: float
    n_decisions: int
    variant: str = "standard"
    environment: str = ""
    accuracy_mean: float = float("nan")
    repetition: int = 0
    trace: list[dict] | None = field(default=None, repr=False)
