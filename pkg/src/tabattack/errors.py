"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: :class:`ConfigError` -> 1,
:class:`DataError` -> 2, :class:`RuntimeFailure` -> 3.
"""


class TabAttackError(Exception):
    pass


class ConfigError(TabAttackError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class DataError(TabAttackError, ValueError):
    """Bad or unreadable input data."""


class MissingColumnError(DataError):
    pass


class NonNumericError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class LabelError(DataError):
    pass


class ShapeError(DataError):
    """Width/shape disagreement between a model, a matrix or a vector."""


class RuntimeFailure(TabAttackError, RuntimeError):
    pass


class TrainingDivergedError(RuntimeFailure):
    pass


class EmptyPoolError(RuntimeFailure):
    pass


class FormatVersionError(RuntimeFailure):
    pass
