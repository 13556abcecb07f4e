"""Exception types raised by the selection engine.

Every domain failure derives from :class:`SelectionError` so callers (and the
CLI, which maps it to exit status 1) can catch a single type.
"""


class SelectionError(ValueError):
    """Base class for structured domain errors."""


class DimensionMismatchError(SelectionError):
    def __init__(self, expected: int, got: int, what: str = "vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class ZeroVectorError(SelectionError):
    def __init__(self, label: str | None = None):
        self.label = label
        where = f" for class {label!r}" if label is not None else ""
        super().__init__(f"cosine similarity undefined: zero vector{where}")


class InvalidSubsetError(SelectionError):
    """A set of ids is not a subset of the set it must live in."""

    def __init__(self, offending, universe: str):
        self.offending = tuple(sorted(offending))
        super().__init__(f"ids {list(self.offending)} are not in {universe}")


class InvalidProblemError(SelectionError):
    pass


class WrongEngineError(SelectionError):
    pass


class AlreadyChosenError(SelectionError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"class {label!r} is already in the selection")


class EnumerationCapError(SelectionError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"exhaustive search needs {count} subsets, above the cap of {cap}; "
            "rerun without the oracle or raise --enum-cap"
        )


class BracketError(SelectionError):
    def __init__(self, lo: float, hi: float, s_lo: float, s_hi: float, target: float):
        self.lo, self.hi, self.s_lo, self.s_hi, self.target = lo, hi, s_lo, s_hi, target
        super().__init__(
            f"water level bracket [{lo:.6g}, {hi:.6g}] gives rate sums "
            f"[{s_lo:.6g}, {s_hi:.6g}] which do not straddle {target}"
        )


class BudgetError(SelectionError):
    def __init__(self, total: float, budget: int):
        self.total = total
        self.budget = budget
        super().__init__(f"fractional solution sums to {total!r}, expected {budget}")


class CollinearDesignError(SelectionError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"regressors are collinear (condition number {condition:.3g})")


class ParseError(SelectionError):
    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        loc = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{loc}: {message}")
