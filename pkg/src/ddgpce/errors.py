"""Exception and warning classes.

Each error carries enough context to be actionable from the CLI, which maps
the three families below onto its exit codes:

* :class:`ConfigError` -> 2
* :class:`ModelEvaluationError` -> 3
* :class:`NumericalError` -> 4
"""


class DdgpceError(Exception):
    """Base class for all package errors."""


class ConfigError(DdgpceError, ValueError):
    """Invalid user configuration or precondition violation."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [message])


class SizeOverflowError(ConfigError):
    """A basis or index set would exceed the configured size cap."""


class InvalidTruncationError(ConfigError):
    """Truncation parameters (N, S, m) are inconsistent."""


class InsufficientTailError(ConfigError):
    """Too few samples to place at least one sample in the beta-tail."""


class WeightError(ConfigError):
    """Sample probabilities are negative or do not sum to one."""


class NumericalError(DdgpceError, ArithmeticError):
    """A numerical procedure failed."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class NonFiniteMomentError(NumericalError):
    """A monomial moment overflowed or became NaN."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class RankDeficientError(NumericalError):
    """The least-squares design matrix has numerical rank below its width."""


class DegenerateLowFidelityError(NumericalError):
    """The low-fidelity surrogate output is (nearly) constant."""


class SingularStiffnessError(NumericalError):
    """The truss stiffness matrix is singular (mechanism or bad areas)."""


class NoClosedFormError(DdgpceError, ValueError):
    """No analytic CVaR formula exists for the model kind."""


class ModelEvaluationError(DdgpceError, RuntimeError):
    """A model evaluator failed or returned unusable values."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class ExternalModelError(ModelEvaluationError):
    """Failure of an external model command (spawn, exit code, timeout)."""

    def __init__(self, message, returncode=None, stderr=None, line=None):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr
        self.line = line


class CountMismatchError(ExternalModelError):
    """The external command returned the wrong number of values."""

    def __init__(self, expected, actual):
        super().__init__(f"expected {expected} output values, got {actual}")
        self.expected = expected
        self.actual = actual


class IllConditionedWarning(UserWarning):
    """Moment or design matrix is poorly conditioned."""


class OversamplingWarning(UserWarning):
    """Experimental design is smaller than the recommended oversampling ratio."""
