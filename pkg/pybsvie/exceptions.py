class PybsvieError(Exception):
    pass


class ConfigurationError(PybsvieError):
    pass


class UnsupportedBuiltinError(ConfigurationError):
    pass


class PreconditionError(PybsvieError):
    pass


class ContractError(PybsvieError):
    pass


class CapacityError(PybsvieError):
    pass


class NumericalRankError(PybsvieError):
    pass


class InputError(PybsvieError):
    pass


class ModeError(PybsvieError):
    pass


class DivergenceError(PybsvieError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
