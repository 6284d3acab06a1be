"""Exception hierarchy shared by the library and the command line front end.

Every class carries the process exit code the CLI reports for it.
"""


class TorusError(Exception):
    exit_code = 5

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        for key, value in self.context.items():
            out[key] = value
        return out


class RejectedInputError(TorusError, ValueError):
    """Malformed or out-of-range input."""

    exit_code = 2


class HypothesisError(TorusError):
    """A step was invoked on input where its stated hypothesis fails."""

    exit_code = 3


class ExtractionFailed(TorusError):
    """A constructive search gave up; never raised silently."""

    exit_code = 4


class InternalAssertionError(TorusError, AssertionError):
    """A guaranteed inequality did not hold, which means a bug."""

    exit_code = 5
