"""Exception hierarchy shared by all modules."""


class SampledCBFError(Exception):
    """Base class for every error raised by this package."""


class InvalidShape(SampledCBFError, ValueError):
    pass


class UnsupportedShape(SampledCBFError, TypeError):
    pass


class DimensionMismatch(SampledCBFError, ValueError):
    pass


class EmptySampleSet(SampledCBFError, ValueError):
    pass


class NotSafe(SampledCBFError, ValueError):
    """The barrier value is negative, so no clearance can be certified."""


class OutsideDomain(SampledCBFError):
    """The barrier value left the domain ``b > -r_bar``."""

    def __init__(self, b, r_bar, message=None):
        self.b = b
        self.r_bar = r_bar
        super().__init__(message or f"barrier value {b:.6g} <= -r_bar = {-r_bar:.6g}")


class Infeasible(SampledCBFError):
    """The safety QP has an empty feasible set."""


class NumericalFailure(SampledCBFError, ArithmeticError):
    pass


class NonFiniteState(SampledCBFError, ArithmeticError):
    pass


class NoCleanSegment(SampledCBFError, ValueError):
    pass


class ParseError(SampledCBFError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(SampledCBFError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message if field is None else f"{field}: {message}")
