"""Enumeration budgets shared by the exhaustive routines."""

from __future__ import annotations

import os

ENV_VAR = "EXPFORGE_BUDGET"


class BudgetExceeded(RuntimeError):
    """Raised before an enumeration whose estimated size exceeds its budget.

    ``estimate`` and ``budget`` are kept on the instance so callers (the CLI in
    particular) can report how far off the request is.
    """

    def __init__(self, what: str, estimate: int, budget: int, hint: str = ""):
        self.what = what
        self.estimate = int(estimate)
        self.budget = int(budget)
        self.hint = hint
        msg = f"{what}: estimated {self.estimate} steps exceeds budget {self.budget}"
        if hint:
            msg += f" ({hint})"
        super().__init__(msg)


def resolve_budget(default: int, budget: int | None = None) -> int:
    """Explicit argument, else the ``EXPFORGE_BUDGET`` override, else ``default``."""
    if budget is not None:
        return int(budget)
    env = os.environ.get(ENV_VAR)
    if env:
        return int(float(env))
    return int(default)


def check_budget(what: str, estimate: int, budget: int, hint: str = "") -> None:
    if estimate > budget:
        raise BudgetExceeded(what, estimate, budget, hint)
