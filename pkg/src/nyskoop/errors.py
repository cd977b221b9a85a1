"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: usage/argument problems exit
with 2, data problems (files, formats, insufficient samples) with 3 and
numerical failures (rank deficiency, blow-up, non-convergence) with 4.
"""


class KoopmanError(Exception):
    """Base class for all library errors."""


class InputError(KoopmanError):
    """Invalid argument values, shapes or non-finite inputs."""

    exit_code = 2


class DataError(KoopmanError):
    """Problems with data files or insufficient data."""

    exit_code = 3


class NumericError(KoopmanError):
    """Numerical failure: rank deficiency, degenerate model, blow-up."""

    exit_code = 4


class RankDeficiencyError(NumericError):
    """Requested rank exceeds the numerically achievable one."""

    def __init__(self, requested: int, achievable: int):
        self.requested = requested
        self.achievable = achievable
        super().__init__(
            f"requested rank {requested} exceeds achievable rank {achievable}"
        )
