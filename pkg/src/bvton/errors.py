"""Exception hierarchy shared across the pipeline.

CLI exit codes: ConfigError -> 2, DependencyError -> 3,
ContractViolation (and subclasses) -> 4.
"""


class ContractViolation(ValueError):
    """An operation was called outside its contract (bad shapes, ranges, state)."""


class DataError(ContractViolation):
    """A dataset directory, manifest, or sample file is missing or corrupt."""


class CheckpointError(ContractViolation):
    """A checkpoint file is unreadable or its architecture descriptor mismatches."""


class ConfigError(ValueError):
    """A config file or CLI option could not be parsed or is inconsistent."""


class DependencyError(RuntimeError):
    """A pipeline stage was invoked before the stages it depends on."""
