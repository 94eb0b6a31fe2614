"""Exception types shared across the package."""


class GdeganError(Exception):
    """Base class for all errors raised by this package."""


class NormalizationError(GdeganError):
    """Input vector expected to be unit-norm is not."""


class UnsupportedDegree(GdeganError):
    """Requested spherical-harmonic degree is outside the supported range."""


class DomainError(GdeganError):
    """Numeric argument outside its valid domain (e.g. negative distance)."""


class ParseError(GdeganError):
    """Malformed structure file; carries the offending 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyStructure(GdeganError):
    """No residues survived parsing and filtering."""


class MissingLigand(GdeganError):
    """Operation requires at least one ligand heavy atom."""


class KeyMismatch(GdeganError):
    """Residue keys without a matching embedding row; lists the offenders."""

    def __init__(self, missing_keys):
        self.missing_keys = list(missing_keys)
        shown = ", ".join(f"{c}/{s}" for c, s in self.missing_keys[:10])
        more = "" if len(self.missing_keys) <= 10 else f" (+{len(self.missing_keys) - 10} more)"
        super().__init__(f"no embedding row for residues: {shown}{more}")


class EmptyEmbedding(GdeganError):
    """Embedding table declares zero rows or zero columns."""


class FormatError(GdeganError):
    """Binary file does not start with the expected magic or is malformed."""


class TruncatedFile(GdeganError):
    """Declared sizes are inconsistent with the actual byte length."""


class ShapeError(GdeganError):
    """Array shapes incompatible with the configured dimensions."""


class ConfigError(GdeganError):
    """Invalid model configuration."""


class DivergenceError(GdeganError):
    """Training loss became non-finite."""


class CorruptCheckpoint(GdeganError):
    """Checkpoint manifest and payload disagree."""


class EmptyInput(GdeganError):
    """Operation requires a non-empty input collection."""


class EmptyLigand(GdeganError):
    """Metric requires a non-empty ligand atom list."""


class DegenerateGroup(GdeganError):
    """Statistic undefined because a group is constant or too small."""
