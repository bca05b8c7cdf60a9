"""Exact and Monte Carlo tools for error exponents of random linear codes and lattices."""

__version__ = "0.1.0"

from expforge._budget import BudgetExceeded

__all__ = ["BudgetExceeded", "__version__"]
