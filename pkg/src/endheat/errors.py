"""Exception types raised across the package.

Each class carries a short ``code`` matching the error names used in reports
and CLI messages.
"""


class EndHeatError(Exception):
    code = "ERROR"


class BreakpointError(EndHeatError, ValueError):
    code = "BREAKPOINT"


class QuadratureError(EndHeatError, ArithmeticError):
    code = "QUADRATURE_FAIL"


class InconclusiveError(EndHeatError):
    code = "INCONCLUSIVE"


class RootError(EndHeatError, ValueError):
    code = "ROOT_FAIL"


class NotApplicableError(EndHeatError, ValueError):
    code = "NOT_APPLICABLE"


class NoDominatingEndError(EndHeatError):
    code = "NO_DOMINATING_END"


class COEError(EndHeatError):
    code = "COE_FAIL"

    def __init__(self, clause, message):
        super().__init__(f"clause {clause}: {message}")
        self.clause = clause


class ProfileUnsupportedError(EndHeatError, TypeError):
    code = "PROFILE_UNSUPPORTED"


class StepError(EndHeatError, ArithmeticError):
    code = "STEP_FAIL"


class SolveError(EndHeatError, ArithmeticError):
    code = "SOLVE_FAIL"


class EigenError(EndHeatError, ArithmeticError):
    code = "EIGEN_FAIL"


class ConstantInputError(EndHeatError, ValueError):
    code = "CONSTANT_INPUT"


class LengthMismatchError(EndHeatError, ValueError):
    code = "LENGTH_MISMATCH"


class NonPositiveError(EndHeatError, ValueError):
    code = "NONPOSITIVE"


class ConfigError(EndHeatError, ValueError):
    code = "CONFIG_INVALID"

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
