"""Error types shared across the package.

Each error carries a short machine code so the CLI can map failures to
distinct exit statuses and load_instance can report which gate rejected a
file.
"""


class SfonlineError(Exception):
    """Base class; `code` is a short machine-readable tag."""

    code = "E_GENERIC"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class FormatError(SfonlineError):
    """Malformed instance file or trace (bad header, non-integer, bad pair)."""

    code = "E_FORMAT"


class MetricError(SfonlineError):
    """Distance matrix violates the metric requirements."""

    code = "E_METRIC"


class ConfigError(SfonlineError):
    """Invalid run/generator configuration."""

    code = "E_CONFIG"


class OracleLimitError(SfonlineError):
    """Exact-optimum request beyond the configured pair limit."""

    code = "E_ORACLE_LIMIT"
