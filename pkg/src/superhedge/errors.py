"""Exceptions raised by the pricing and hedging routines."""


class ModelError(ValueError):
    """The market model admits arbitrage or is otherwise unusable."""


class DegeneratePayoffError(ValueError):
    """The payoff gives no finite price (e.g. never exercisable)."""


class InsufficientEndowmentError(ValueError):
    """The starting portfolio cannot finance the requested hedge."""
