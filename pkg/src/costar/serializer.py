"""Build training and evaluation texts under the three concatenation schemes.

A serialized instance always takes one of these shapes:

* cs: ``post [SEP] conceptualisation [SEP] group relation statement [EOS]``
* sc: ``post [SEP] group relation statement [SEP] conceptualisation [EOS]``
* s:  ``post [SEP] group relation statement [EOS]``

Subword tokenization and final token-level truncation belong to the
generation backend; this module guarantees the markers are intact and
applies only a character-level pre-truncation safeguard that shortens the
post segment, never the annotation segments or the markers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .core import (
    EOS,
    SEP,
    Annotation,
    Post,
    RuleCode,
    Scheme,
    normalize_space,
    validate_annotation,
)

# Generous bound used by the character-level safeguard: subword tokenizers
# average well under this many characters per token.
CHARS_PER_TOKEN_BOUND = 6


class SerializationError(ValueError):
    """Raised when a post or annotation cannot be serialized."""


class InvalidAnnotationError(SerializationError):
    """Annotation failed validation; the report is attached."""

    def __init__(self, report: list[RuleCode]) -> None:
        super().__init__(f"annotation failed validation: {[c.value for c in report]}")
        self.report = report


@dataclass(frozen=True)
class SerializerConfig:
    """Corpus build settings. ``max_length_tokens`` bounds the safeguard."""

    scheme: Scheme
    shuffle_seed: int = 0
    max_length_tokens: int = 256

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.max_length_tokens < 16:
            raise ValueError("max_length_tokens must be at least 16")


@dataclass(frozen=True)
class TrainingInstance:
    """One serialized training text. ``shuffled_index`` is the position
    assigned by the seeded corpus shuffle, -1 until placed."""

    post_id: str
    scheme: Scheme
    text: str
    shuffled_index: int = -1


@dataclass(frozen=True)
class BuildError:
    """A record that could not be serialized during a corpus build."""

    index: int
    post_id: str
    message: str
    codes: tuple[RuleCode, ...] = ()


def _checked_post_text(post: Post) -> str:
    text = normalize_space(post.text)
    if not text:
        raise SerializationError(f"post {post.id!r} has empty text")
    if SEP in text or EOS in text:
        raise SerializationError(f"post {post.id!r} contains literal marker text")
    return text


def serialize(post: Post, annotation: Annotation, scheme: Scheme | str) -> TrainingInstance:
    """Serialize one (post, annotation) pair under a scheme.

    The annotation must pass :func:`validate_annotation`; otherwise
    :class:`InvalidAnnotationError` carries the report. All segments are
    whitespace-normalized so the result is a single line with exactly
    2 (cs, sc) or 1 (s) separator markers and one trailing end marker.
    """
    scheme = Scheme(scheme)
    report = validate_annotation(annotation)
    if report:
        raise InvalidAnnotationError(report)
    post_text = _checked_post_text(post)
    tuple_text = normalize_space(annotation.stereotype.rendered())
    concept_text = normalize_space(annotation.conceptualisation.text)
    if scheme is Scheme.CS:
        text = f"{post_text} {SEP} {concept_text} {SEP} {tuple_text} {EOS}"
    elif scheme is Scheme.SC:
        text = f"{post_text} {SEP} {tuple_text} {SEP} {concept_text} {EOS}"
    else:
        text = f"{post_text} {SEP} {tuple_text} {EOS}"
    return TrainingInstance(post_id=post.id, scheme=scheme, text=text)


def eval_prefix(post: Post) -> str:
    """The evaluation-time input: the post text and one separator marker."""
    return f"{_checked_post_text(post)} {SEP}"


def _pre_truncate(text: str, max_length_tokens: int) -> str:
    """Character-level safeguard: shorten the post segment if the whole
    text exceeds the character budget. Markers and annotation segments
    are never cut, so the end marker survives and no marker is split."""
    budget = max_length_tokens * CHARS_PER_TOKEN_BOUND
    if len(text) <= budget:
        return text
    head, _, tail = text.partition(SEP)
    keep = max(budget - (len(text) - len(head)), 16)
    return f"{head[:keep].rstrip()} {SEP}{tail}"


def fisher_yates(items: list, rng: random.Random) -> None:
    """In-place Fisher-Yates shuffle driven by the given RNG."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


def build_corpus(
    posts: Iterable[Post] | Mapping[str, Post],
    annotations: Iterable[Annotation],
    config: SerializerConfig,
) -> tuple[list[TrainingInstance], list[BuildError]]:
    """Serialize every annotation, apply the safeguard, and shuffle.

    The shuffle is a Fisher-Yates pass seeded with ``config.shuffle_seed``,
    so the same inputs and seed reproduce the same ordering byte for
    byte. Records that fail validation are collected as
    :class:`BuildError` entries; the valid remainder is still built, so a
    partially bad input yields partial output plus an error list.
    """
    if isinstance(posts, Mapping):
        posts_by_id = dict(posts)
    else:
        posts_by_id = {p.id: p for p in posts}
    instances: list[TrainingInstance] = []
    errors: list[BuildError] = []
    for index, annotation in enumerate(annotations):
        post = posts_by_id.get(annotation.post_id)
        if post is None:
            errors.append(
                BuildError(index, annotation.post_id, "no post with this id")
            )
            continue
        try:
            instance = serialize(post, annotation, config.scheme)
        except InvalidAnnotationError as err:
            errors.append(
                BuildError(index, annotation.post_id, str(err), tuple(err.report))
            )
            continue
        except SerializationError as err:
            errors.append(BuildError(index, annotation.post_id, str(err)))
            continue
        instances.append(
            replace(instance, text=_pre_truncate(instance.text, config.max_length_tokens))
        )
    fisher_yates(instances, random.Random(config.shuffle_seed))
    return (
        [replace(inst, shuffled_index=i) for i, inst in enumerate(instances)],
        errors,
    )
