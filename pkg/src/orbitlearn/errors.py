"""Exception taxonomy shared by the library and the CLI exit-code mapping."""


class DataError(Exception):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class NumericalError(Exception):
    """Non-finite objective or divergent iteration (CLI exit code 4)."""
