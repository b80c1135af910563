"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, TrainingFault -> 4.
"""


class SkelrepError(Exception):
    pass


class ConfigError(SkelrepError):
    """Invalid configuration value or incompatible configuration combination."""


class StructureError(SkelrepError):
    """Structurally invalid graph or mismatched tensor/parameter shapes."""


class DataError(SkelrepError):
    """Dataset-level failure (missing file, bad contents, empty data)."""


class ParseError(DataError):
    """Malformed input file; carries a line number when one is known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrityError(DataError):
    """Checkpoint or container file failed its checksum / truncation check."""


class VersionError(DataError):
    """Checkpoint format version is not the one this code writes."""


class TrainingFault(SkelrepError):
    """Non-finite loss or gradient encountered during optimization."""
