EXIT_RUNTIME = 1
EXIT_USAGE = 2


class RecNetError(Exception):
    """Base class for every failure the pipeline reports to the user."""
    exit_code = EXIT_RUNTIME


class ParseError(RecNetError):

    def __init__(self, line_number, reason):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class EmptyInputError(RecNetError):
    pass


class EmptyDatasetError(RecNetError):
    pass


class NumericError(RecNetError, ArithmeticError):
    pass


class CapacityError(RecNetError):
    pass


class ArgumentError(RecNetError, ValueError):
    exit_code = EXIT_USAGE


class IndexRangeError(ArgumentError, IndexError):
    pass


class ConfigError(RecNetError):
    exit_code = EXIT_USAGE

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))
