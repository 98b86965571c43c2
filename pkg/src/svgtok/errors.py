"""Exception hierarchy for the svgtok pipeline.

Every stage raises a subclass of :class:`SvgTokError`; preprocessing errors
additionally carry the name of the stage that raised them so batch drivers can
log where a sample died without parsing messages.
"""

from __future__ import annotations


class SvgTokError(Exception):
    """Base class for all svgtok errors."""


# ---- parse / serialize ----


class MalformedMarkup(SvgTokError):
    """The input is not well-formed XML or lacks a usable viewBox."""


class UnsupportedElement(SvgTokError):
    """An element outside the supported structure set (informational)."""


class BadPathData(SvgTokError):
    """A path `d` attribute violates the path grammar."""


# ---- preprocess ----


class PreprocessError(SvgTokError):
    """Base for stage-tagged preprocessing failures."""

    stage: str = "preprocess"

    def __init__(self, message: str):
        super().__init__(f"[{self.stage}] {message}")


class RejectedContent(PreprocessError):
    """The document contains an element from the reject set."""

    stage = "clean"


class DanglingReference(PreprocessError):
    """A use element points at a missing target id."""

    stage = "expand_use"


class CircularReference(PreprocessError):
    """use elements form a reference cycle."""

    stage = "expand_use"


class SingularTransform(PreprocessError):
    """A transform's determinant is numerically zero."""

    stage = "bake_transforms"


class DegenerateViewBox(PreprocessError):
    """The viewBox has non-positive width or height."""

    stage = "normalize_viewbox"


class UnstableSample(PreprocessError):
    """No drawable geometry survives quantization."""

    stage = "quantize"


# ---- tokenization ----


class OutOfRange(SvgTokError):
    """A coordinate cannot be represented in the vocabulary."""


class UnsupportedTag(SvgTokError):
    """An element tag has no structure token."""


class InvalidLiteral(SvgTokError):
    """An attribute span is malformed or contains token-delimiting markup."""


class ArityViolation(SvgTokError):
    """A command is not followed by exactly its parameter tokens."""


class UnbalancedStructure(SvgTokError):
    """Open/close structure tokens do not nest."""


class UnknownToken(SvgTokError):
    """A token string or id is not in the vocabulary."""


class UnknownComposite(SvgTokError):
    """A segment token id has no expansion in the vocabulary."""


class EmptyCorpus(SvgTokError):
    """Training or reporting was asked to run over zero usable samples."""


# ---- embedding init ----


class DomainError(SvgTokError):
    """A numeric value lies outside the normalized [0, 1] domain."""


class IdOutOfRange(SvgTokError):
    """A description id exceeds the base embedding table."""


class EmptyDescription(SvgTokError):
    """A token meta has no description ids to average."""
