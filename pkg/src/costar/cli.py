"""Command-line pipelines over the toolkit.

Subcommands: validate, build, stats, split, eval, report. Every command is
reproducible from its inputs and flags alone; all randomness flows through
explicit seed flags with documented defaults.

Exit codes: 0 success, 1 validation findings, 2 usage error, 3 backend or
I/O failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path
from typing import Sequence

from .backend import (
    DEFAULT_MAX_NEW_TOKENS,
    DEFAULT_NUM_CANDIDATES,
    Backend,
    BackendError,
    BaselineBackend,
    StdioBackendClient,
)
from .core import Annotation, Post, Scheme
from .dataset import (
    CorpusFormatError,
    CorpusManifest,
    export,
    ingest,
    split,
    stats,
    write_corpus,
)
from .evaluation import (
    GENERIC_TOP_K,
    load_run,
    run_eval,
    sample_dev,
    save_run,
    write_report,
)
from .grammar import render_tuple
from .serializer import SerializerConfig, build_corpus

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(ValueError):
    """Semantically invalid flags (argparse accepts them syntactically)."""


def _print_err(message: str) -> None:
    print(message, file=sys.stderr)


def _ingest_or_report(path: str, fmt: str | None):
    posts, annotations, errors = ingest(path, fmt)
    for err in errors:
        _print_err(f"row {err.row}: {err.code}: {err.message}")
    return posts, annotations, errors


def cmd_validate(args: argparse.Namespace) -> int:
    posts, annotations, errors = _ingest_or_report(args.input, args.format)
    summary = (
        f"{len(annotations)} valid records ({len(posts)} posts), "
        f"{len(errors)} findings"
    )
    print(summary)
    if args.report:
        lines = [
            json.dumps(
                {"row": e.row, "code": e.code, "message": e.message},
                ensure_ascii=False,
            )
            for e in errors
        ]
        Path(args.report).write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
        )
    return EXIT_FINDINGS if errors else EXIT_OK


def cmd_build(args: argparse.Namespace) -> int:
    posts, annotations, ingest_errors = _ingest_or_report(args.input, args.format)
    config = SerializerConfig(
        scheme=Scheme(args.scheme),
        shuffle_seed=args.seed,
        max_length_tokens=args.max_length,
    )
    instances, build_errors = build_corpus(posts, annotations, config)
    for err in build_errors:
        _print_err(f"record {err.index}: {err.post_id}: {err.message}")
    count = write_corpus(instances, args.out)
    manifest_path = Path(args.manifest) if args.manifest else Path(args.out).with_suffix(
        ".manifest.json"
    )
    manifest = CorpusManifest.from_posts(posts)
    payload = manifest.to_dict()
    payload.update(
        {
            "scheme": config.scheme.value,
            "shuffle_seed": config.shuffle_seed,
            "n_instances": count,
            "n_rejected": len(ingest_errors) + len(build_errors),
        }
    )
    manifest_path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {count} instances to {args.out} (manifest: {manifest_path})")
    return EXIT_FINDINGS if (ingest_errors or build_errors) else EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    _, annotations, _ = _ingest_or_report(args.input, args.format)
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    result = stats(annotations, args.k)
    payload = {
        "n_annotations": result.n_annotations,
        "top_targeted_groups": [list(t) for t in result.top_targeted_groups],
        "top_implied_statements": [list(t) for t in result.top_implied_statements],
        "top_conceptualisations": [list(t) for t in result.top_conceptualisations],
        "demographics": {
            axis: [list(t) for t in table]
            for axis, table in result.demographics.items()
        },
        "reported": dict(result.reported),
    }
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote stats to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    posts, _, _ = _ingest_or_report(args.input, args.format)
    if not 0 < args.dev_fraction < 1:
        raise UsageError("--dev-fraction must be strictly between 0 and 1")
    train_ids, dev_ids = split(posts, args.dev_fraction, args.seed)
    payload = {"train": train_ids, "dev": dev_ids, "seed": args.seed}
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"train: {len(train_ids)} posts, dev: {len(dev_ids)} posts")
    return EXIT_OK


def _baseline_set(
    posts: list[Post],
    annotations: list[Annotation],
    train_ids: set[str] | None,
    build_seed: int,
) -> dict[str, Backend]:
    """The default four-backend set: one per concatenation scheme, with
    the separator-ablated scheme instantiated twice."""
    if train_ids is not None:
        train_posts = [p for p in posts if p.id in train_ids]
        train_annotations = [a for a in annotations if a.post_id in train_ids]
    else:
        train_posts, train_annotations = posts, annotations
    backends: dict[str, Backend] = {}
    for scheme, label, instance_id in (
        (Scheme.CS, "cs", 1),
        (Scheme.SC, "sc", 1),
        (Scheme.S, "s#1", 1),
        (Scheme.S, "s#2", 2),
    ):
        config = SerializerConfig(scheme=scheme, shuffle_seed=build_seed)
        instances, errors = build_corpus(train_posts, train_annotations, config)
        for err in errors:
            _print_err(f"build[{label}] record {err.index}: {err.message}")
        backends[label] = BaselineBackend.train(instances, instance_id=instance_id)
    return backends


def _external_backend(command: str) -> StdioBackendClient:
    return StdioBackendClient(shlex.split(command))


def cmd_eval(args: argparse.Namespace) -> int:
    posts, annotations, _ = _ingest_or_report(args.input, args.format)
    if not posts:
        _print_err("no valid records to evaluate")
        return EXIT_RUNTIME

    ids = [p.id for p in posts]
    train_ids: set[str] | None = None
    if args.dev_fraction is not None:
        if not 0 < args.dev_fraction < 1:
            raise UsageError("--dev-fraction must be strictly between 0 and 1")
        train, dev = split(ids, args.dev_fraction, args.seed)
        train_ids = set(train)
        pool = dev
    else:
        pool = ids

    n = args.n if args.n is not None else min(500, len(pool))
    if n > len(pool):
        raise UsageError(f"--n {n} exceeds the {len(pool)} posts available")
    sampled = sample_dev(pool, n, args.seed)

    posts_by_id = {p.id: p for p in posts}
    references: dict[str, list[str]] = {}
    for annotation in annotations:
        references.setdefault(annotation.post_id, []).append(
            render_tuple(annotation.stereotype)
        )
    generic = [s for s, _ in stats(annotations, GENERIC_TOP_K).top_implied_statements]

    backends: dict[str, Backend] = {}
    clients: list[StdioBackendClient] = []
    try:
        selectors = args.backend or ["baseline"]
        for selector in selectors:
            if selector == "baseline":
                backends.update(
                    _baseline_set(posts, annotations, train_ids, args.build_seed)
                )
            else:
                client = _external_backend(selector)
                clients.append(client)
                label = client.descriptor.default_label()
                while label in backends:
                    label += "'"
                backends[label] = client
        run = run_eval(
            backends,
            [posts_by_id[i] for i in sampled],
            references=references,
            generic_statements=generic,
            num_candidates=args.candidates,
            max_new_tokens=args.max_new_tokens,
        )
    finally:
        for client in clients:
            client.close()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_run(run, out_dir / "run.json")
    paths = write_report(run, out_dir)
    for label in sorted(run.metrics):
        m = run.metrics[label]
        print(
            f"{label}: well_formed={m.well_formed_rate:.3f} "
            f"post_overlap={m.post_overlap:.3f} generic={m.generic_rate:.3f}"
        )
    print(f"run: {out_dir / 'run.json'}")
    print(f"reports: {paths['markdown']}, {paths['html']}, {paths['metrics']}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run = load_run(args.run)
    paths = write_report(run, args.out_dir)
    print(f"reports: {paths['markdown']}, {paths['html']}, {paths['metrics']}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    posts, annotations, errors = _ingest_or_report(args.input, args.format)
    count = export(posts, annotations, args.out)
    print(f"wrote {count} records to {args.out}")
    return EXIT_FINDINGS if errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costar",
        description="structured stereotype annotations: validate, serialize, "
        "generate, evaluate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p: argparse.ArgumentParser) -> None:
        p.add_argument("input", help="annotation records (jsonl or csv)")
        p.add_argument("--format", choices=["jsonl", "csv"], default=None)

    p = sub.add_parser("validate", help="check records against the annotation rules")
    add_input(p)
    p.add_argument("--report", help="write findings as jsonl to this path")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("build", help="serialize records into a training corpus")
    add_input(p)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], required=True)
    p.add_argument("--seed", type=int, default=0, help="corpus shuffle seed")
    p.add_argument("--max-length", type=int, default=256)
    p.add_argument("--out", required=True, help="corpus output path (jsonl)")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("stats", help="frequency tables and demographics")
    add_input(p)
    p.add_argument("--k", type=int, default=8, help="histogram size")
    p.add_argument("--out", help="write stats json here instead of stdout")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("split", help="seeded train/dev partition")
    add_input(p)
    p.add_argument("--dev-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write id lists as json here")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("eval", help="generate, parse, and score candidates")
    add_input(p)
    p.add_argument("--n", type=int, default=None, help="sample size (default: min(500, pool))")
    p.add_argument("--seed", type=int, default=0, help="split/sample seed")
    p.add_argument("--build-seed", type=int, default=0, help="corpus shuffle seed")
    p.add_argument("--dev-fraction", type=float, default=None,
                   help="hold out a dev pool first (default: evaluate over all posts)")
    p.add_argument("--candidates", type=int, default=DEFAULT_NUM_CANDIDATES)
    p.add_argument("--max-new-tokens", type=int, default=DEFAULT_MAX_NEW_TOKENS)
    p.add_argument("--backend", action="append", default=None,
                   help='"baseline" (default) or an external command speaking '
                   "the stdio protocol; repeatable")
    p.add_argument("--out-dir", default="eval_out")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("report", help="re-render reports from a saved run")
    p.add_argument("run", help="run.json from a previous eval")
    p.add_argument("--out-dir", default="eval_out")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("export", help="round-trip records back to jsonl")
    add_input(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as err:
        _print_err(f"usage error: {err}")
        return EXIT_USAGE
    except (BackendError, CorpusFormatError, OSError) as err:
        _print_err(f"error: {err}")
        return EXIT_RUNTIME
    except ValueError as err:
        _print_err(f"usage error: {err}")
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
