"""Domain types and validity rules shared across the toolkit.

All types here are immutable value types, safe to share between
concurrent workers. Content-level problems (empty fields, unknown
relations, over-long conceptualisations, repeated concepts) are
*reported* by :func:`validate_annotation` so that bulk ingestion can
audit records instead of dying on the first bad row. Structural
corruption that would break the serialized text format (newlines or
literal marker text inside annotation fields) is rejected at
construction time instead.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from enum import Enum

SEP = "[SEP]"
EOS = "[EOS]"
MARKERS = (SEP, EOS)


def normalize_space(text: str) -> str:
    """Collapse Unicode whitespace runs to single spaces and trim."""
    return " ".join(text.split())


def word_count(text: str) -> int:
    """Count whitespace-separated words after NFC normalization.

    Hyphenated words count as one word.
    """
    return len(unicodedata.normalize("NFC", text).split())


class Relation(str, Enum):
    """The closed set of eight linking verbs allowed in a stereotype tuple.

    Construction is case-insensitive (``Relation("ARE")`` works) but the
    stored symbol is always lowercase. Any symbol outside the eight
    members raises ``ValueError``.
    """

    ARE = "are"
    HAVE = "have"
    CAN = "can"
    CAUSE = "cause"
    PREVENT = "prevent"
    WANT = "want"
    SHOULD = "should"
    DO = "do"

    @classmethod
    def _missing_(cls, value: object) -> "Relation | None":
        if isinstance(value, str):
            lowered = value.lower()
            for member in cls:
                if member.value == lowered:
                    return member
        return None

    @property
    def conceptnet(self) -> str | None:
        """The ConceptNet 5 counterpart label, where one exists."""
        return _CONCEPTNET_COUNTERPARTS[self]


_CONCEPTNET_COUNTERPARTS: dict[Relation, str | None] = {
    Relation.ARE: "/r/RelatedTo",
    Relation.HAVE: "/r/HasA",
    Relation.CAN: "/r/CapableOf",
    Relation.CAUSE: "/r/Causes",
    Relation.PREVENT: "/r/ObstructedBy",
    Relation.WANT: "/r/Desires",
    Relation.SHOULD: None,
    Relation.DO: None,
}

RELATION_SYMBOLS = frozenset(member.value for member in Relation)


class Scheme(str, Enum):
    """Concatenation scheme for training and evaluation texts."""

    CS = "cs"  # post, conceptualisation, stereotype tuple
    SC = "sc"  # post, stereotype tuple, conceptualisation
    S = "s"  # post, stereotype tuple only

    @classmethod
    def _missing_(cls, value: object) -> "Scheme | None":
        if isinstance(value, str):
            lowered = value.lower()
            for member in cls:
                if member.value == lowered:
                    return member
        return None


class PostSource(str, Enum):
    """Provenance bucket of a post."""

    REDDIT = "reddit"
    TWITTER = "twitter"
    HATE_SITE = "hate_site"

    @classmethod
    def _missing_(cls, value: object) -> "PostSource | None":
        if isinstance(value, str):
            lowered = value.lower()
            for member in cls:
                if member.value == lowered:
                    return member
        return None


def _reject_structural(value: str, field_name: str) -> None:
    if "\n" in value or "\r" in value:
        raise ValueError(f"{field_name} must not contain newlines")
    for marker in MARKERS:
        if marker in value:
            raise ValueError(
                f"{field_name} must not contain the literal marker {marker!r}"
            )


@dataclass(frozen=True)
class StereotypeTuple:
    """A structured implied stereotype: targeted group, relation, statement.

    ``relation`` is canonicalized to a :class:`Relation` member when the
    given string matches one case-insensitively; otherwise the raw string
    is kept so that :func:`validate_annotation` can report BAD_RELATION
    instead of the constructor failing.
    """

    targeted_group: str
    relation: Relation | str
    implied_statement: str

    def __post_init__(self) -> None:
        _reject_structural(self.targeted_group, "targeted_group")
        _reject_structural(self.implied_statement, "implied_statement")
        if not isinstance(self.relation, Relation):
            raw = str(self.relation)
            _reject_structural(raw, "relation")
            try:
                object.__setattr__(self, "relation", Relation(raw))
            except ValueError:
                pass

    @property
    def relation_symbol(self) -> str:
        return (
            self.relation.value
            if isinstance(self.relation, Relation)
            else str(self.relation)
        )

    def rendered(self) -> str:
        """Single-space-joined surface form: group, relation, statement."""
        return f"{self.targeted_group} {self.relation_symbol} {self.implied_statement}"


@dataclass(frozen=True)
class Conceptualisation:
    """A short label (one to three words) naming the underlying concept."""

    text: str

    def __post_init__(self) -> None:
        _reject_structural(self.text, "conceptualisation")

    def word_count(self) -> int:
        return word_count(self.text)


@dataclass(frozen=True)
class Post:
    """A source text to be annotated.

    The text is deliberately not validated at construction: emptiness is
    checked at the point of use (ingestion, serialization) so malformed
    records can be collected in bulk.
    """

    id: str
    text: str
    source: PostSource | str = PostSource.REDDIT
    sub_source: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.source, PostSource):
            try:
                object.__setattr__(self, "source", PostSource(str(self.source)))
            except ValueError:
                pass

    @property
    def source_label(self) -> str:
        return (
            self.source.value
            if isinstance(self.source, PostSource)
            else str(self.source)
        )


@dataclass(frozen=True)
class AnnotatorDemographics:
    """Self-reported annotator demographics; every axis is optional."""

    gender: str | None = None
    race: str | None = None
    age_band: str | None = None


@dataclass(frozen=True)
class Annotation:
    """One structured annotation of one post."""

    post_id: str
    stereotype: StereotypeTuple
    conceptualisation: Conceptualisation
    annotator: AnnotatorDemographics | None = None


class RuleCode(str, Enum):
    """Violation codes reported by :func:`validate_annotation`."""

    EMPTY_GROUP = "EMPTY_GROUP"
    EMPTY_STATEMENT = "EMPTY_STATEMENT"
    BAD_RELATION = "BAD_RELATION"
    CONCEPT_TOO_LONG = "CONCEPT_TOO_LONG"
    CONCEPT_REPEATS_TUPLE = "CONCEPT_REPEATS_TUPLE"


def validate_annotation(annotation: Annotation) -> list[RuleCode]:
    """Check every content rule and return the codes of the violated ones.

    Pure and deterministic; an empty report means the annotation is
    valid. Rule notes:

    * CONCEPT_TOO_LONG fires when the conceptualisation exceeds three
      words, counted on Unicode whitespace after NFC normalization.
    * CONCEPT_REPEATS_TUPLE is the no-repetition rule: the lowercased,
      whitespace-normalized conceptualisation must not occur as a
      contiguous substring of the lowercased rendered tuple. An empty
      conceptualisation is trivially such a substring, so empty concepts
      are reported through this rule.
    """
    report: list[RuleCode] = []
    tup = annotation.stereotype
    if not tup.targeted_group.strip():
        report.append(RuleCode.EMPTY_GROUP)
    if not tup.implied_statement.strip():
        report.append(RuleCode.EMPTY_STATEMENT)
    if not isinstance(tup.relation, Relation):
        report.append(RuleCode.BAD_RELATION)
    if annotation.conceptualisation.word_count() > 3:
        report.append(RuleCode.CONCEPT_TOO_LONG)
    concept_text = normalize_space(
        unicodedata.normalize("NFC", annotation.conceptualisation.text)
    ).lower()
    rendered = normalize_space(unicodedata.normalize("NFC", tup.rendered())).lower()
    if concept_text in rendered:
        report.append(RuleCode.CONCEPT_REPEATS_TUPLE)
    return report
