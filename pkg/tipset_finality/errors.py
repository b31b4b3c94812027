"""Exception hierarchy for the finality calculator."""

from typing import Optional


class FinalityError(Exception):
    """Base class for every error raised by tipset_finality."""


class DomainError(FinalityError, ValueError):
    """A probability primitive was called outside its domain."""


class FormatError(FinalityError, ValueError):
    """Trace input does not follow the CSV/JSON grammar."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class GapError(FormatError):
    """Trace rounds are not consecutive."""

    def __init__(self, missing_round: int, row: Optional[int] = None):
        super().__init__(f"missing round {missing_round}", row=row)
        self.missing_round = missing_round


class RangeError(FinalityError, ValueError):
    """A round window or settlement falls outside the available trace."""


class DegenerateConditionError(FinalityError, ArithmeticError):
    """Observed chain is too unlikely under the configured e to condition on."""

    def __init__(self, window_rounds: int, chain_blocks: int, tail: float):
        super().__init__(
            f"P(T >= {chain_blocks}) = {tail:.3g} over {window_rounds} round(s); "
            "trace inconsistent with configured blocks per round"
        )
        self.window_rounds = window_rounds
        self.chain_blocks = chain_blocks
        self.tail = tail
