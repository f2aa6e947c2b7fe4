"""Exception hierarchy.

Configuration problems (bad scenarios, mismatched options) derive from
:class:`ConfigurationError`; failures of the numerics derive from
:class:`NumericalError`. The command line maps them to exit codes 2 and 3.
"""


class ConfigurationError(ValueError):
    pass


class InvalidScenarioError(ConfigurationError):
    pass


class NumericalError(RuntimeError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    pass


class BracketingError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    """Null space of dimension > 1 at the multiplier boundary."""


class DivergenceError(NumericalError):
    pass
