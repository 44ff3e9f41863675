"""Exception hierarchy shared by all modules.

Each base class carries the CLI exit code it maps to.
"""


class SsbError(Exception):
    exit_code = 1


class ConfigError(SsbError, ValueError):
    exit_code = 2


class DataError(SsbError, ValueError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class DuplicateRowError(ParseError):
    pass


class CoverageError(DataError):
    pass


class InsufficientHistoryError(DataError):
    pass


class NumericError(SsbError, ArithmeticError):
    exit_code = 4


class ParameterDomainError(NumericError, ValueError):
    pass


class PhaseError(NumericError, ValueError):
    pass


class DomainError(NumericError, ValueError):
    pass


class StationarityError(NumericError, ValueError):
    pass


class SimulationOverflowError(NumericError, OverflowError):
    pass


class DegenerateWindowError(NumericError, ZeroDivisionError):
    pass


class ConstructionError(DataError):
    pass


class InsufficientDataError(DataError):
    pass
