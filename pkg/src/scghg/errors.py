"""Exception hierarchy. The CLI maps each family to an exit code."""


class ScghgError(Exception):
    exit_code = 1


class ConfigError(ScghgError):
    """Bad configuration. Carries every violation found, not just the first."""

    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ValidationError(ScghgError):
    """Input data that breaks a documented invariant (schema, positivity, grid)."""

    exit_code = 3


class SchemaError(ValidationError):
    pass


class NumericalError(ScghgError):
    """Non-finite state or a solver that failed to converge."""

    exit_code = 4


class CalibrationError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(NumericalError):
    pass


class NoOptimumError(ValueError):
    pass


class TrialError(NumericalError):
    def __init__(self, trial_id, cause):
        super().__init__(f"trial {trial_id}: {cause}")
        self.trial_id = trial_id
        self.cause = cause
