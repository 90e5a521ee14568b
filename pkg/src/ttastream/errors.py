"""Exception types shared across the engine.

Every error the engine raises deliberately derives from TtaError so callers
can distinguish contract violations from genuine bugs.
"""


class TtaError(Exception):
    """Base class for all engine errors."""


class ZeroVector(TtaError):
    """A vector with (near-)zero norm reached a normalization step."""


class DimensionMismatch(TtaError):
    """Operand dimensions disagree."""


class InvalidTemperature(TtaError):
    """Softmax temperature must be strictly positive."""


class NonFiniteInput(TtaError):
    """An input contains NaN or infinity."""


class SingleClass(TtaError):
    """Normalized entropy needs at least two classes."""


class TooFewPrompts(TtaError):
    """Intra-class ranking needs at least two prompts per class."""


class InvalidM(TtaError):
    """Adjacent-embedding count must satisfy 1 <= M <= K."""


class RankTooLarge(TtaError):
    """Requested subspace rank exceeds the stacked matrix's min dimension."""


class SvdFailure(TtaError):
    """The SVD iteration did not converge."""


class EmptyCommittee(TtaError):
    """Majority vote over an empty label list."""


class InvalidGamma(TtaError):
    """Consistency penalty gamma must be >= 1."""


class InvalidClass(TtaError):
    """Class id outside [0, C)."""


class NonFinite(TtaError):
    """A loss value overflowed or is otherwise non-finite."""


class NonFiniteGradient(TtaError):
    """A gradient contains NaN or infinity."""


class InvalidSpec(TtaError):
    """Synthetic benchmark spec violates its invariants."""


class ConfigError(TtaError):
    """Run configuration value out of range or unparseable."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class DatasetError(TtaError):
    """Dataset file unreadable or inconsistent."""


class IoError(DatasetError):
    """Low-level read/write failure."""


class BadMagic(DatasetError):
    """File does not start with the dataset magic tag."""


class UnsupportedVersion(DatasetError):
    """Dataset format version not supported by this reader."""


class TruncatedPayload(DatasetError):
    """File ends mid-structure; carries the byte offset of the failure."""

    def __init__(self, offset: int, message: str = ""):
        super().__init__(f"truncated payload at byte {offset}" + (f": {message}" if message else ""))
        self.offset = offset


class HeaderPayloadMismatch(DatasetError):
    """Header fields disagree with the payload actually present."""


class NoLabels(TtaError):
    """A labeled-data metric was requested on an unlabeled stream."""
