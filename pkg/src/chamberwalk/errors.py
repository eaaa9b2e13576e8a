"""Exceptions shared across the package.

The command line maps these onto distinct exit codes, so library code should
raise the most specific one that applies.
"""


class SchemaError(ValueError):
    """A config or input document does not match the expected shape."""


class CheckFailure(AssertionError):
    """A verification check ran to completion and failed."""


class SizeGuardError(RuntimeError):
    """A requested computation exceeds a built-in size guard."""
