"""Exception types shared across the package."""

from __future__ import annotations


class EvParkSimError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EvParkSimError, ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateWindowError(InputError):
    """A truncated-normal window carries essentially no probability mass."""


class ScenarioError(EvParkSimError):
    """A scenario file or fleet failed validation.

    Collects every problem found so a broken file is reported in one pass.
    """

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SearchSpaceError(EvParkSimError):
    """The exhaustive scheduler refused an instance as too large."""


class InternalCheckError(EvParkSimError):
    """An internal invariant (energy balance, totals) failed after the fact."""
