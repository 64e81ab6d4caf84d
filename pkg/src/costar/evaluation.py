"""Evaluation harness: seeded dev sampling, multi-backend generation runs,
proxy metrics, and side-by-side reports.

The metrics here are measurable stand-ins for human judgment: they score
form (parseability), lexical overlap, and genericness, never quality or
accuracy. Every report states this in its header. Raw model text is
retained verbatim in the run and in the reports.
"""

from __future__ import annotations

import html
import json
import random
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .backend import Backend, BackendDescriptor, GenerationRequest
from .core import EOS, SEP, Post, normalize_space
from .grammar import ParsedOutput, parse_scheme_output
from .serializer import SerializationError, eval_prefix

GENERIC_TOP_K = 8


def sample_dev(dev_ids: Sequence[str], n: int, seed: int) -> list[str]:
    """Seeded sampling without replacement; returns sorted ids.

    Ids are sorted before sampling so the draw depends only on the id set
    and the seed; the same seed always yields the same sample.
    """
    ids = sorted(dev_ids)
    if n > len(ids):
        raise ValueError(f"cannot sample {n} posts from a dev set of {len(ids)}")
    return sorted(random.Random(seed).sample(ids, n))


def overlap_tokens(text: str) -> frozenset[str]:
    """Token set for overlap metrics: markers removed, lowercased,
    punctuation stripped per token, stopwords kept, set semantics."""
    text = text.replace(SEP, " ").replace(EOS, " ")
    tokens = set()
    for token in text.lower().split():
        core = token.strip(string.punctuation)
        if core:
            tokens.add(core)
    return frozenset(tokens)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    """Set Jaccard; symmetric; two empty sets count as identical (1.0)."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class CandidateRecord:
    """One candidate: verbatim text plus its parse under the backend's
    scheme. ``flag`` is "" or one of duplicate / padded / error:<msg>."""

    text: str
    truncated: bool
    flag: str
    parsed: ParsedOutput


@dataclass(frozen=True)
class PostEval:
    post_id: str
    post_text: str
    references: tuple[str, ...]
    candidates: Mapping[str, tuple[CandidateRecord, ...]]


@dataclass(frozen=True)
class Disagreement:
    """Two instances trained on the same scheme produced different
    candidate sets for this post."""

    post_id: str
    label_a: str
    label_b: str


@dataclass(frozen=True)
class ProxyMetrics:
    """Aggregate proxies for one backend over one run.

    well_formed_rate is the fraction of candidate slots whose text parses
    into a complete tuple. relation_histogram counts relations over those
    well-formed candidates, so its values sum to n_well_formed.
    post_overlap is the mean Jaccard between candidate and post tokens
    over all slots. reference_overlap is the mean best-of-references
    Jaccard over slots of posts that have references (None when no post
    does). generic_rate is the fraction of slots whose parsed implied
    statement is one of the run's top generic statements.
    """

    n_posts: int
    n_candidates: int
    n_well_formed: int
    well_formed_rate: float
    relation_histogram: Mapping[str, int]
    post_overlap: float
    reference_overlap: float | None
    generic_rate: float

    def __post_init__(self) -> None:
        rates = [self.well_formed_rate, self.post_overlap, self.generic_rate]
        if self.reference_overlap is not None:
            rates.append(self.reference_overlap)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError("rates must lie in [0, 1]")
        if sum(self.relation_histogram.values()) != self.n_well_formed:
            raise ValueError("relation histogram must sum to the well-formed count")

    def to_dict(self) -> dict[str, object]:
        return {
            "n_posts": self.n_posts,
            "n_candidates": self.n_candidates,
            "n_well_formed": self.n_well_formed,
            "well_formed_rate": self.well_formed_rate,
            "relation_histogram": dict(self.relation_histogram),
            "post_overlap": self.post_overlap,
            "reference_overlap": self.reference_overlap,
            "generic_rate": self.generic_rate,
        }


@dataclass(frozen=True)
class EvalRun:
    """One completed evaluation: sampled posts, per-backend candidates
    with parses, proxy metrics, and the same-scheme disagreement log."""

    sampled_ids: tuple[str, ...]
    descriptors: Mapping[str, BackendDescriptor]
    posts: tuple[PostEval, ...]
    metrics: Mapping[str, ProxyMetrics]
    disagreements: tuple[Disagreement, ...]
    num_candidates: int
    max_new_tokens: int
    generic_statements: tuple[str, ...] = ()


def _normalize_statement(text: str) -> str:
    return normalize_space(text).lower()


def compute_metrics(
    label: str,
    posts: Sequence[PostEval],
    generic_statements: Sequence[str],
) -> ProxyMetrics:
    """Deterministic reduce over one backend's candidates. Permutation
    -invariant in post order: everything is a mean or a count."""
    generic = {_normalize_statement(s) for s in generic_statements}
    histogram: dict[str, int] = {}
    n_candidates = 0
    n_well_formed = 0
    n_generic = 0
    post_overlaps: list[float] = []
    ref_overlaps: list[float] = []
    for post in posts:
        post_tokens = overlap_tokens(post.post_text)
        ref_tokens = [overlap_tokens(r) for r in post.references]
        for record in post.candidates.get(label, ()):
            n_candidates += 1
            cand_tokens = overlap_tokens(record.text)
            post_overlaps.append(jaccard(cand_tokens, post_tokens))
            if ref_tokens:
                ref_overlaps.append(max(jaccard(cand_tokens, r) for r in ref_tokens))
            parsed = record.parsed
            if parsed.well_formed and parsed.tuple is not None:
                n_well_formed += 1
                symbol = parsed.tuple.relation_symbol
                histogram[symbol] = histogram.get(symbol, 0) + 1
                if _normalize_statement(parsed.tuple.implied_statement) in generic:
                    n_generic += 1
    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0
    return ProxyMetrics(
        n_posts=len(posts),
        n_candidates=n_candidates,
        n_well_formed=n_well_formed,
        well_formed_rate=n_well_formed / n_candidates if n_candidates else 0.0,
        relation_histogram=dict(sorted(histogram.items())),
        post_overlap=mean(post_overlaps),
        reference_overlap=mean(ref_overlaps) if ref_overlaps else None,
        generic_rate=n_generic / n_candidates if n_candidates else 0.0,
    )


def _error_records(message: str, n: int, scheme) -> tuple[CandidateRecord, ...]:
    parsed = parse_scheme_output("", scheme)
    return tuple(
        CandidateRecord(text="", truncated=False, flag=f"error:{message}", parsed=parsed)
        for _ in range(n)
    )


def _find_disagreements(
    descriptors: Mapping[str, BackendDescriptor], posts: Sequence[PostEval]
) -> tuple[Disagreement, ...]:
    labels = sorted(descriptors)
    pairs = [
        (a, b)
        for i, a in enumerate(labels)
        for b in labels[i + 1 :]
        if descriptors[a].scheme is descriptors[b].scheme
    ]
    found = []
    for post in posts:
        for a, b in pairs:
            texts_a = [r.text for r in post.candidates[a]]
            texts_b = [r.text for r in post.candidates[b]]
            if texts_a != texts_b:
                found.append(Disagreement(post.post_id, a, b))
    return tuple(found)


def run_eval(
    backends: Mapping[str, Backend],
    posts: Sequence[Post],
    references: Mapping[str, Sequence[str]] | None = None,
    generic_statements: Sequence[str] = (),
    num_candidates: int = 3,
    max_new_tokens: int = 50,
) -> EvalRun:
    """Generate and parse candidates for every post with every backend.

    Each candidate is parsed with its own backend's scheme, so pairing the
    wrong parser with a scheme is not possible from this entry point. A
    failing backend call never aborts the run: its slots are filled with
    empty flagged records and the remaining backends still run. Instances
    that share a scheme are cross-checked and their differing posts are
    logged as disagreements.
    """
    if not backends:
        raise ValueError("run_eval needs at least one backend")
    references = references or {}
    post_evals: list[PostEval] = []
    for post in posts:
        prefix_error: str | None = None
        try:
            prefix = eval_prefix(post)
        except SerializationError as err:
            prefix_error = str(err)
            prefix = ""
        per_backend: dict[str, tuple[CandidateRecord, ...]] = {}
        for label, backend in backends.items():
            scheme = backend.descriptor.scheme
            if prefix_error is not None:
                per_backend[label] = _error_records(prefix_error, num_candidates, scheme)
                continue
            request = GenerationRequest(
                prefix=prefix,
                num_candidates=num_candidates,
                max_new_tokens=max_new_tokens,
            )
            try:
                result = backend.generate(request)
            except Exception as err:  # noqa: BLE001 - isolate, keep the run alive
                per_backend[label] = _error_records(str(err), num_candidates, scheme)
                continue
            per_backend[label] = tuple(
                CandidateRecord(
                    text=text,
                    truncated=truncated,
                    flag=flag,
                    parsed=parse_scheme_output(text, scheme),
                )
                for text, truncated, flag in zip(
                    result.candidates, result.truncated_flags, result.flags
                )
            )
        post_evals.append(
            PostEval(
                post_id=post.id,
                post_text=post.text,
                references=tuple(references.get(post.id, ())),
                candidates=per_backend,
            )
        )
    descriptors = {label: backend.descriptor for label, backend in backends.items()}
    metrics = {
        label: compute_metrics(label, post_evals, generic_statements)
        for label in sorted(descriptors)
    }
    return EvalRun(
        sampled_ids=tuple(p.id for p in posts),
        descriptors=descriptors,
        posts=tuple(post_evals),
        metrics=metrics,
        disagreements=_find_disagreements(descriptors, post_evals),
        num_candidates=num_candidates,
        max_new_tokens=max_new_tokens,
        generic_statements=tuple(generic_statements),
    )


def run_to_dict(run: EvalRun) -> dict[str, object]:
    """JSON form of a run: raw candidate text with flags; parses and
    metrics are recomputed on load, so the parser stays the source of
    truth."""
    return {
        "sampled_ids": list(run.sampled_ids),
        "descriptors": {k: d.to_dict() for k, d in run.descriptors.items()},
        "num_candidates": run.num_candidates,
        "max_new_tokens": run.max_new_tokens,
        "generic_statements": list(run.generic_statements),
        "posts": [
            {
                "post_id": p.post_id,
                "post_text": p.post_text,
                "references": list(p.references),
                "candidates": {
                    label: [
                        {"text": r.text, "truncated": r.truncated, "flag": r.flag}
                        for r in records
                    ]
                    for label, records in p.candidates.items()
                },
            }
            for p in run.posts
        ],
    }


def run_from_dict(data: Mapping[str, object]) -> EvalRun:
    descriptors = {
        label: BackendDescriptor.from_dict(d)
        for label, d in data["descriptors"].items()
    }
    posts = []
    for raw in data["posts"]:
        candidates = {}
        for label, records in raw["candidates"].items():
            scheme = descriptors[label].scheme
            candidates[label] = tuple(
                CandidateRecord(
                    text=str(r["text"]),
                    truncated=bool(r["truncated"]),
                    flag=str(r["flag"]),
                    parsed=parse_scheme_output(str(r["text"]), scheme),
                )
                for r in records
            )
        posts.append(
            PostEval(
                post_id=str(raw["post_id"]),
                post_text=str(raw["post_text"]),
                references=tuple(raw["references"]),
                candidates=candidates,
            )
        )
    generic = tuple(data.get("generic_statements", ()))
    metrics = {
        label: compute_metrics(label, posts, generic) for label in sorted(descriptors)
    }
    return EvalRun(
        sampled_ids=tuple(data["sampled_ids"]),
        descriptors=descriptors,
        posts=tuple(posts),
        metrics=metrics,
        disagreements=_find_disagreements(descriptors, posts),
        num_candidates=int(data["num_candidates"]),
        max_new_tokens=int(data["max_new_tokens"]),
        generic_statements=generic,
    )


def save_run(run: EvalRun, path: Path | str) -> None:
    Path(path).write_text(
        json.dumps(run_to_dict(run), ensure_ascii=False, sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )


def load_run(path: Path | str) -> EvalRun:
    return run_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


_REPORT_NOTE = (
    "Metrics below are automatic proxies (form, overlap, genericness); "
    "they do not measure accuracy or quality, which need human judgment."
)


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def _md_cell(text: str) -> str:
    return text.replace("|", "\\|")


def render_markdown(run: EvalRun) -> str:
    lines = ["# Generation evaluation report", "", _REPORT_NOTE, ""]
    lines += ["## Metrics", ""]
    lines.append(
        "| backend | scheme | posts | candidates | well-formed | post overlap | "
        "reference overlap | generic rate |"
    )
    lines.append("|---|---|---|---|---|---|---|---|")
    for label in sorted(run.metrics):
        m = run.metrics[label]
        d = run.descriptors[label]
        lines.append(
            f"| {_md_cell(label)} | {d.scheme.value} | {m.n_posts} | {m.n_candidates} "
            f"| {_fmt(m.well_formed_rate)} | {_fmt(m.post_overlap)} "
            f"| {_fmt(m.reference_overlap)} | {_fmt(m.generic_rate)} |"
        )
    lines.append("")
    lines += ["## Relations parsed", ""]
    for label in sorted(run.metrics):
        histogram = run.metrics[label].relation_histogram
        body = ", ".join(f"{k}: {v}" for k, v in histogram.items()) or "none"
        lines.append(f"- **{_md_cell(label)}**: {body}")
    lines.append("")
    if run.disagreements:
        lines += ["## Same-scheme instance disagreements", ""]
        for d in run.disagreements:
            lines.append(f"- post `{d.post_id}`: {d.label_a} vs {d.label_b}")
        lines.append("")
    if run.posts:
        lines += ["## Posts", ""]
        for post in run.posts:
            lines.append(f"### Post {post.post_id}")
            lines.append("")
            lines.append(f"> {_md_cell(post.post_text)}")
            lines.append("")
            lines.append("| backend | candidates |")
            lines.append("|---|---|")
            for label in sorted(post.candidates):
                joined = " / ".join(r.text for r in post.candidates[label])
                lines.append(f"| {_md_cell(label)} | {_md_cell(joined)} |")
            lines.append("")
            refs = " / ".join(post.references) or "(none)"
            lines.append(f"References: {_md_cell(refs)}")
            lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def render_html(run: EvalRun) -> str:
    e = html.escape
    parts = [
        "<!doctype html>",
        "<meta charset='utf-8'>",
        "<title>Generation evaluation report</title>",
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
        "td,th{border:1px solid #999;padding:4px 8px;text-align:left}"
        "blockquote{background:#f4f4f4;padding:8px}</style>",
        "<h1>Generation evaluation report</h1>",
        f"<p>{e(_REPORT_NOTE)}</p>",
        "<h2>Metrics</h2>",
        "<table><tr><th>backend</th><th>scheme</th><th>posts</th><th>candidates</th>"
        "<th>well-formed</th><th>post overlap</th><th>reference overlap</th>"
        "<th>generic rate</th></tr>",
    ]
    for label in sorted(run.metrics):
        m = run.metrics[label]
        d = run.descriptors[label]
        parts.append(
            f"<tr><td>{e(label)}</td><td>{e(d.scheme.value)}</td><td>{m.n_posts}</td>"
            f"<td>{m.n_candidates}</td><td>{_fmt(m.well_formed_rate)}</td>"
            f"<td>{_fmt(m.post_overlap)}</td><td>{_fmt(m.reference_overlap)}</td>"
            f"<td>{_fmt(m.generic_rate)}</td></tr>"
        )
    parts.append("</table>")
    if run.disagreements:
        parts.append("<h2>Same-scheme instance disagreements</h2><ul>")
        parts.extend(
            f"<li>post {e(d.post_id)}: {e(d.label_a)} vs {e(d.label_b)}</li>"
            for d in run.disagreements
        )
        parts.append("</ul>")
    if run.posts:
        parts.append("<h2>Posts</h2>")
        for post in run.posts:
            parts.append(f"<h3>Post {e(post.post_id)}</h3>")
            parts.append(f"<blockquote>{e(post.post_text)}</blockquote>")
            parts.append("<table><tr><th>backend</th><th>candidates</th></tr>")
            for label in sorted(post.candidates):
                joined = " / ".join(r.text for r in post.candidates[label])
                parts.append(f"<tr><td>{e(label)}</td><td>{e(joined)}</td></tr>")
            parts.append("</table>")
            refs = " / ".join(post.references) or "(none)"
            parts.append(f"<p>References: {e(refs)}</p>")
    return "\n".join(parts) + "\n"


def metrics_lines(run: EvalRun) -> list[str]:
    """One machine-readable JSON summary line per backend."""
    lines = []
    for label in sorted(run.metrics):
        payload = {"backend": label, "scheme": run.descriptors[label].scheme.value}
        payload.update(run.metrics[label].to_dict())
        lines.append(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    return lines


def write_report(run: EvalRun, directory: Path | str) -> dict[str, Path]:
    """Write report.md, report.html, and metrics.jsonl into a directory.

    Output is a pure function of the run (no timestamps), so identical
    runs produce byte-identical report files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "markdown": directory / "report.md",
        "html": directory / "report.html",
        "metrics": directory / "metrics.jsonl",
    }
    paths["markdown"].write_text(render_markdown(run), encoding="utf-8")
    paths["html"].write_text(render_html(run), encoding="utf-8")
    paths["metrics"].write_text(
        "\n".join(metrics_lines(run)) + "\n", encoding="utf-8"
    )
    return paths
