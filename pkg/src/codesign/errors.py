"""Domain errors. The CLI maps any of these to exit code 1, printing the
class name followed by the message (which names the offending key)."""


class CodesignError(Exception):
    pass


class InvalidConfig(CodesignError):
    """Config file missing, unreadable, or not valid JSON."""


class MissingField(CodesignError):
    pass


class NonPositiveQuantity(CodesignError):
    pass


class UnknownStrategyName(CodesignError):
    pass


class InvariantViolation(CodesignError):
    """A structural constraint on loaded data does not hold."""


class DegenerateSplit(CodesignError):
    """A cut or fraction leaves one side of the pipeline empty."""


class NoFeasiblePlan(CodesignError):
    pass


class ShapeMismatch(CodesignError):
    pass


class DimensionMismatch(CodesignError):
    pass


class StepSizeOutOfRange(CodesignError):
    pass


class SchemaMismatch(CodesignError):
    pass
