"""Ingest annotation records, persist datasets and corpora, compute statistics.

Two file formats live here:

* Annotation records: UTF-8 JSONL, one object per line with fields
  ``{post_id, post_text, source, sub_source, targeted_group, relation,
  implied_statement, conceptualisation, annotator: {gender, race, age_band}}``
  (``annotator`` may be null). A CSV variant carries the same fields as
  columns, the annotator sub-object flattened to ``annotator_gender``,
  ``annotator_race``, ``annotator_age_band``.
* Serialized corpora: UTF-8 JSONL, one object per line with fields
  ``{post_id, scheme, text}``; line order is the training order.
"""

from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    MARKERS,
    Annotation,
    AnnotatorDemographics,
    Conceptualisation,
    Post,
    StereotypeTuple,
    normalize_space,
    validate_annotation,
)
from .serializer import TrainingInstance

RECORD_FIELDS = (
    "post_id",
    "post_text",
    "source",
    "sub_source",
    "targeted_group",
    "relation",
    "implied_statement",
    "conceptualisation",
)
ANNOTATOR_FIELDS = ("gender", "race", "age_band")

# Ingest error codes beyond the validation rule codes.
BAD_JSON = "BAD_JSON"
MISSING_FIELD = "MISSING_FIELD"
BAD_FIELD = "BAD_FIELD"
DUPLICATE_POST = "DUPLICATE_POST"


@dataclass(frozen=True)
class IngestError:
    """One rejected record: 1-based file row, code, human-readable message.

    ``code`` is a validation rule code for content findings, or one of
    BAD_JSON / MISSING_FIELD / BAD_FIELD / DUPLICATE_POST for records that
    never reached validation.
    """

    row: int
    code: str
    message: str


class CorpusFormatError(ValueError):
    """A serialized-corpus file holds a line that does not parse."""


def _optional_str(value: object) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise TypeError("expected a string or null")
    value = value.strip()
    return value or None


def _record_to_objects(record: Mapping[str, object]) -> tuple[Post, Annotation]:
    """Turn one raw record dict into (Post, Annotation). Raises KeyError
    for absent fields, TypeError/ValueError for malformed ones."""
    values: dict[str, str] = {}
    for name in RECORD_FIELDS:
        raw = record[name]
        if not isinstance(raw, str):
            raise TypeError(f"field {name!r} must be a string")
        values[name] = raw
    if not values["post_id"].strip():
        raise ValueError("field 'post_id' must be non-empty")
    # posts must be serializable later: non-empty, single-line, marker-free
    if not values["post_text"].strip():
        raise ValueError("field 'post_text' must be non-empty")
    for marker in MARKERS:
        if marker in values["post_text"]:
            raise ValueError(f"field 'post_text' contains the literal marker {marker!r}")
    if "\n" in values["post_text"] or "\r" in values["post_text"]:
        raise ValueError("field 'post_text' must not contain newlines")
    annotator = None
    raw_annotator = record.get("annotator")
    if raw_annotator is not None:
        if not isinstance(raw_annotator, Mapping):
            raise TypeError("field 'annotator' must be an object or null")
        annotator = AnnotatorDemographics(
            gender=_optional_str(raw_annotator.get("gender")),
            race=_optional_str(raw_annotator.get("race")),
            age_band=_optional_str(raw_annotator.get("age_band")),
        )
        if annotator == AnnotatorDemographics():
            annotator = None
    post = Post(
        id=values["post_id"].strip(),
        text=values["post_text"],
        source=values["source"],
        sub_source=values["sub_source"],
    )
    annotation = Annotation(
        post_id=post.id,
        stereotype=StereotypeTuple(
            targeted_group=values["targeted_group"],
            relation=values["relation"],
            implied_statement=values["implied_statement"],
        ),
        conceptualisation=Conceptualisation(values["conceptualisation"]),
        annotator=annotator,
    )
    return post, annotation


def _csv_record(row: Mapping[str, str | None]) -> dict[str, object]:
    record: dict[str, object] = {
        name: row[name] for name in RECORD_FIELDS if row.get(name) is not None
    }
    annotator = {
        name: (row.get(f"annotator_{name}") or None) for name in ANNOTATOR_FIELDS
    }
    record["annotator"] = annotator if any(annotator.values()) else None
    return record


def _iter_jsonl(path: Path):
    """Yield (1-based row, parse error or None, record dict or None)."""
    with path.open(encoding="utf-8") as handle:
        for row, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                yield row, IngestError(row, BAD_JSON, str(err)), None
                continue
            if not isinstance(record, dict):
                yield row, IngestError(row, BAD_JSON, "record is not an object"), None
                continue
            yield row, None, record


def _iter_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        for raw in reader:
            yield reader.line_num, None, _csv_record(raw)


def detect_format(path: Path | str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in {".jsonl", ".json"}:
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise ValueError(f"cannot infer record format from {path!r}; pass one of jsonl, csv")


def ingest(
    path: Path | str, fmt: str | None = None
) -> tuple[list[Post], list[Annotation], list[IngestError]]:
    """Load annotation records from a JSONL or CSV file.

    Lenient per record: every malformed or invalid record becomes an
    :class:`IngestError` (one per failing rule code) and is skipped, while
    the rest of the file still loads. Posts are deduplicated by id; a
    repeated id with different text or source is rejected. Deterministic:
    output order follows file order. I/O failures propagate as OSError.
    """
    path = Path(path)
    fmt = fmt or detect_format(path)
    if fmt not in {"jsonl", "csv"}:
        raise ValueError(f"unknown record format {fmt!r}")
    rows = _iter_csv(path) if fmt == "csv" else _iter_jsonl(path)

    posts: list[Post] = []
    posts_by_id: dict[str, Post] = {}
    annotations: list[Annotation] = []
    errors: list[IngestError] = []
    for row, parse_error, record in rows:
        if parse_error is not None:
            errors.append(parse_error)
            continue
        try:
            post, annotation = _record_to_objects(record)
        except KeyError as err:
            errors.append(IngestError(row, MISSING_FIELD, f"missing field {err.args[0]!r}"))
            continue
        except (TypeError, ValueError) as err:
            errors.append(IngestError(row, BAD_FIELD, str(err)))
            continue
        report = validate_annotation(annotation)
        if report:
            errors.extend(
                IngestError(row, code.value, f"post {post.id!r}: {code.value}")
                for code in report
            )
            continue
        seen = posts_by_id.get(post.id)
        if seen is None:
            posts_by_id[post.id] = post
            posts.append(post)
        elif seen != post:
            errors.append(
                IngestError(row, DUPLICATE_POST, f"post {post.id!r} re-appears with different fields")
            )
            continue
        annotations.append(annotation)
    return posts, annotations, errors


def _record_from_objects(post: Post, annotation: Annotation) -> dict[str, object]:
    annotator = None
    if annotation.annotator is not None:
        annotator = {
            "gender": annotation.annotator.gender,
            "race": annotation.annotator.race,
            "age_band": annotation.annotator.age_band,
        }
    return {
        "post_id": post.id,
        "post_text": post.text,
        "source": post.source_label,
        "sub_source": post.sub_source,
        "targeted_group": annotation.stereotype.targeted_group,
        "relation": annotation.stereotype.relation_symbol,
        "implied_statement": annotation.stereotype.implied_statement,
        "conceptualisation": annotation.conceptualisation.text,
        "annotator": annotator,
    }


def export(
    posts: Iterable[Post], annotations: Iterable[Annotation], path: Path | str
) -> int:
    """Write annotation records as JSONL; returns the line count.

    Round-trips with :func:`ingest`: exporting then ingesting yields the
    same annotation multiset. Annotations whose post id is unknown raise
    KeyError rather than silently writing a partial record.
    """
    posts_by_id = {p.id: p for p in posts}
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for annotation in annotations:
            record = _record_from_objects(posts_by_id[annotation.post_id], annotation)
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def write_corpus(instances: Sequence[TrainingInstance], path: Path | str) -> int:
    """Persist serialized instances, one ``{post_id, scheme, text}`` object
    per line, ordered by shuffled_index when assigned. Returns line count."""
    ordered = sorted(instances, key=lambda inst: inst.shuffled_index)
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for inst in ordered:
            record = {"post_id": inst.post_id, "scheme": inst.scheme.value, "text": inst.text}
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(ordered)


def load_corpus(path: Path | str) -> list[TrainingInstance]:
    """Read a serialized corpus. Strict: corpus files are artifact-built,
    so any malformed line raises :class:`CorpusFormatError` with its row.
    ``shuffled_index`` is recovered from line order."""
    instances: list[TrainingInstance] = []
    with Path(path).open(encoding="utf-8") as handle:
        for row, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                instance = TrainingInstance(
                    post_id=str(record["post_id"]),
                    scheme=record["scheme"],
                    text=str(record["text"]),
                    shuffled_index=len(instances),
                )
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as err:
                raise CorpusFormatError(f"corpus line {row}: {err}") from err
            instances.append(instance)
    return instances


@dataclass(frozen=True)
class ManifestRow:
    source: str
    sub_source: str
    n_posts: int


@dataclass(frozen=True)
class CorpusManifest:
    """Per-(source, sub_source) post counts plus their total."""

    rows: tuple[ManifestRow, ...]
    total: int

    def __post_init__(self) -> None:
        if self.total != sum(row.n_posts for row in self.rows):
            raise ValueError("manifest total must equal the sum of its rows")

    @classmethod
    def from_posts(cls, posts: Iterable[Post]) -> "CorpusManifest":
        buckets: Counter[tuple[str, str]] = Counter()
        seen: set[str] = set()
        for post in posts:
            if post.id in seen:
                continue
            seen.add(post.id)
            buckets[(post.source_label, post.sub_source)] += 1
        rows = tuple(
            ManifestRow(source, sub_source, n)
            for (source, sub_source), n in sorted(buckets.items())
        )
        return cls(rows=rows, total=sum(buckets.values()))

    def by_source(self) -> dict[str, int]:
        totals: Counter[str] = Counter()
        for row in self.rows:
            totals[row.source] += row.n_posts
        return dict(totals)

    def to_dict(self) -> dict[str, object]:
        return {
            "rows": [
                {"source": r.source, "sub_source": r.sub_source, "n_posts": r.n_posts}
                for r in self.rows
            ],
            "total": self.total,
        }


def _top_k(values: Iterable[str], k: int) -> tuple[tuple[str, int], ...]:
    counts = Counter(normalize_space(v).lower() for v in values)
    counts.pop("", None)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return tuple(ranked[:k])


def _demographic_table(values: list[str]) -> tuple[tuple[str, int, float], ...]:
    counts = Counter(values)
    reported = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return tuple(
        (value, count, round(100.0 * count / reported, 1)) for value, count in ranked
    )


@dataclass(frozen=True)
class CorpusStats:
    """Surface-form frequency tables over a set of annotations.

    Histogram keys are lowercased and whitespace-normalized but never
    lemmatized, so inflected variants stay distinct. Ties rank
    lexicographically. Demographic percentages are over annotations that
    reported the axis, so each axis sums to 100 up to rounding.
    """

    n_annotations: int
    top_targeted_groups: tuple[tuple[str, int], ...]
    top_implied_statements: tuple[tuple[str, int], ...]
    top_conceptualisations: tuple[tuple[str, int], ...]
    demographics: Mapping[str, tuple[tuple[str, int, float], ...]] = field(
        default_factory=dict
    )
    reported: Mapping[str, int] = field(default_factory=dict)


def stats(annotations: Sequence[Annotation], k: int = 8) -> CorpusStats:
    """Compute top-k histograms and annotator demographic tables."""
    if k < 1:
        raise ValueError("k must be at least 1")
    demographics: dict[str, tuple[tuple[str, int, float], ...]] = {}
    reported: dict[str, int] = {}
    for axis in ANNOTATOR_FIELDS:
        values = [
            normalize_space(getattr(a.annotator, axis)).lower()
            for a in annotations
            if a.annotator is not None and getattr(a.annotator, axis)
        ]
        reported[axis] = len(values)
        demographics[axis] = _demographic_table(values) if values else ()
    return CorpusStats(
        n_annotations=len(annotations),
        top_targeted_groups=_top_k(
            (a.stereotype.targeted_group for a in annotations), k
        ),
        top_implied_statements=_top_k(
            (a.stereotype.implied_statement for a in annotations), k
        ),
        top_conceptualisations=_top_k(
            (a.conceptualisation.text for a in annotations), k
        ),
        demographics=demographics,
        reported=reported,
    )


def split(
    posts: Iterable[Post | str], dev_fraction: float, seed: int
) -> tuple[list[str], list[str]]:
    """Seeded train/dev partition over post ids.

    Accepts posts or bare ids. Ids are sorted before sampling so the split
    depends only on the id set and the seed, not on input order. Dev size
    is round(dev_fraction * n). Returns (train_ids, dev_ids), both sorted;
    the two sides are disjoint and cover every id.
    """
    if not 0 < dev_fraction < 1:
        raise ValueError("dev_fraction must be strictly between 0 and 1")
    ids = sorted({post.id if isinstance(post, Post) else post for post in posts})
    n_dev = round(dev_fraction * len(ids))
    dev = set(random.Random(seed).sample(ids, n_dev))
    return [i for i in ids if i not in dev], sorted(dev)
