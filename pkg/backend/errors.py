"""
Exception hierarchy shared by the models, services and command routes.

Every error carries the process exit code the command line uses for it.
"""


class GroverPTError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1
    kind = 'error'


class ContractViolation(GroverPTError, ValueError):
    """An operation was called outside its precondition"""
    exit_code = 8
    kind = 'contract'


class InvariantViolation(GroverPTError, ArithmeticError):
    """An internal consistency check failed on exact data"""
    exit_code = 9
    kind = 'invariant'


class UsageError(GroverPTError):
    """Unknown flag or malformed command-line argument"""
    exit_code = 2
    kind = 'usage'


class RangeError(GroverPTError, ValueError):
    """A requested parameter range cannot be satisfied"""
    exit_code = 3
    kind = 'range'


class MemoryGuardError(GroverPTError, MemoryError):
    """A simulation would exceed the configured qubit cap"""
    exit_code = 4
    kind = 'memory-guard'

    def __init__(self, n, cap, mode):
        super().__init__(f"{mode} mode refuses n={n} qubits (cap {cap})")
        self.n = n
        self.cap = cap
        self.mode = mode


class SolverError(GroverPTError, RuntimeError):
    """Root finding failed; keeps the iteration trace for diagnosis"""
    exit_code = 6
    kind = 'solver'

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class QuadratureError(GroverPTError, RuntimeError):
    """Adaptive quadrature missed its tolerance"""
    exit_code = 7
    kind = 'quadrature'

    def __init__(self, message, estimate, error_estimate):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


# Exit code for a validation run that completed with failing checks
VALIDATION_FAILED_EXIT = 5
