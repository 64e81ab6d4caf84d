"""Parse free-form text into stereotype tuples and scheme-structured output.

``parse_tuple`` is the inverse of ``render_tuple``: for any tuple whose
targeted group contains no standalone relation word, parsing the
rendering gives back an equal tuple. ``parse_scheme_output`` applies the
tuple grammar to raw generation output under a concatenation scheme and
never raises; malformed text comes back with ``well_formed=False`` and a
failure code.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum

from .core import (
    EOS,
    RELATION_SYMBOLS,
    SEP,
    Conceptualisation,
    Relation,
    Scheme,
    StereotypeTuple,
    normalize_space,
    word_count,
)


class ParseFailure(str, Enum):
    """Reason codes for text that does not fit the grammar."""

    EMPTY = "EMPTY"
    NO_RELATION = "NO_RELATION"
    MARKER_IN_TEXT = "MARKER_IN_TEXT"
    MISSING_TUPLE = "MISSING_TUPLE"
    MISSING_CONCEPT = "MISSING_CONCEPT"
    EMPTY_CONCEPT = "EMPTY_CONCEPT"
    CONCEPT_TOO_LONG = "CONCEPT_TOO_LONG"
    EXTRA_SEPARATOR = "EXTRA_SEPARATOR"


class TupleParseError(ValueError):
    """Raised by :func:`parse_tuple` when no valid split exists."""

    def __init__(self, code: ParseFailure, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class ParsedOutput:
    """Result of parsing one raw completion under a scheme.

    ``well_formed`` is true iff every field the scheme prescribes is
    present and valid; fields that did parse are populated even when the
    overall output is malformed.
    """

    tuple: StereotypeTuple | None
    conceptualisation: Conceptualisation | None
    well_formed: bool
    failure_reason: ParseFailure | None = None


def _token_core(token: str) -> str:
    """Strip leading/trailing ASCII punctuation and lowercase."""
    return token.strip(string.punctuation).lower()


def parse_tuple(text: str) -> StereotypeTuple:
    """Split text at the leftmost standalone relation word.

    The relation is matched as a whole token, case-insensitively, with
    leading/trailing punctuation ignored. Both the prefix (targeted
    group) and the suffix (implied statement) must be non-empty, so a
    relation word in first or last position does not count as a split.
    Raises :class:`TupleParseError` with code EMPTY on blank input,
    MARKER_IN_TEXT when the text still contains separator/end markers
    (strip those via :func:`parse_scheme_output` first), and NO_RELATION
    when no valid split exists.
    """
    if not text or not text.strip():
        raise TupleParseError(ParseFailure.EMPTY, "blank input")
    if SEP in text or EOS in text:
        raise TupleParseError(
            ParseFailure.MARKER_IN_TEXT, f"marker text inside tuple: {text!r}"
        )
    tokens = text.split()
    for i in range(1, len(tokens) - 1):
        if _token_core(tokens[i]) in RELATION_SYMBOLS:
            return StereotypeTuple(
                targeted_group=" ".join(tokens[:i]),
                relation=Relation(_token_core(tokens[i])),
                implied_statement=" ".join(tokens[i + 1 :]),
            )
    raise TupleParseError(
        ParseFailure.NO_RELATION,
        f"no standalone relation word with non-empty sides in {text!r}",
    )


def render_tuple(t: StereotypeTuple) -> str:
    """Single-space-joined rendering of a stereotype tuple."""
    return t.rendered()


def _parse_tuple_segment(segment: str | None, failures: list[ParseFailure]):
    if segment is None or not segment.strip():
        failures.append(ParseFailure.MISSING_TUPLE)
        return None
    if SEP in segment:
        failures.append(ParseFailure.EXTRA_SEPARATOR)
        return None
    try:
        return parse_tuple(segment)
    except TupleParseError as err:
        failures.append(err.code)
        return None


def _parse_concept_segment(segment: str | None, failures: list[ParseFailure]):
    if segment is None:
        failures.append(ParseFailure.MISSING_CONCEPT)
        return None
    if SEP in segment:
        failures.append(ParseFailure.EXTRA_SEPARATOR)
        return None
    normalized = normalize_space(segment)
    if not normalized:
        failures.append(ParseFailure.EMPTY_CONCEPT)
        return None
    if word_count(normalized) > 3:
        failures.append(ParseFailure.CONCEPT_TOO_LONG)
        return None
    return Conceptualisation(normalized)


def parse_scheme_output(text: str, scheme: Scheme | str) -> ParsedOutput:
    """Parse one raw completion according to its concatenation scheme.

    The first end marker and everything after it are discarded. For the
    cs scheme the text before the first separator is the
    conceptualisation and the rest is the tuple; for sc the order is
    reversed; for s the whole text is the tuple. Never raises: malformed
    text yields ``well_formed=False`` with the first failure code, and
    whichever fields did parse are still populated.
    """
    scheme = Scheme(scheme)
    eos_at = text.find(EOS)
    body = (text if eos_at < 0 else text[:eos_at]).strip()
    if not body:
        return ParsedOutput(None, None, False, ParseFailure.EMPTY)

    failures: list[ParseFailure] = []
    if scheme is Scheme.S:
        tup = _parse_tuple_segment(body, failures)
        concept = None
    else:
        head, sep_found, tail = body.partition(SEP)
        if scheme is Scheme.CS:
            concept_seg, tuple_seg = head, (tail if sep_found else None)
        else:
            tuple_seg, concept_seg = head, (tail if sep_found else None)
        tup = _parse_tuple_segment(tuple_seg, failures)
        concept = _parse_concept_segment(concept_seg, failures)

    well_formed = not failures
    return ParsedOutput(tup, concept, well_formed, failures[0] if failures else None)
