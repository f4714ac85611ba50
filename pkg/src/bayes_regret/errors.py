"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-range input (bad symbol, bad parameter, bad class spec)."""


class UndefinedConditionalError(ValueError):
    """Conditioning on a prefix that has probability zero."""


class EnumerationBudgetError(RuntimeError):
    """Exhaustive enumeration of X^n would exceed the configured budget."""

    def __init__(self, n: int, size: int, budget: int):
        self.n = n
        self.size = size
        self.budget = budget
        super().__init__(
            f"|X|^n = {size}^{n} exceeds enumeration budget {budget} (horizon n={n})"
        )


class ConsistencyError(RuntimeError):
    """Artifacts on disk do not belong together (hash or weight mismatch)."""
