#!/usr/bin/env python3
"""Run the full offline pipeline against a records file.

Stages: validate -> stats -> build one corpus per scheme -> eval with the
retrieval baselines -> render reports. Everything lands under --out-dir.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from costar.cli import main as cli_main


def run(args: list[str]) -> None:
    code = cli_main(args)
    if code != 0:
        raise SystemExit(f"stage {args[0]!r} exited with {code}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "records",
        nargs="?",
        default=str(Path(__file__).resolve().parent.parent
                    / "tests" / "fixtures" / "synthetic_corpus.jsonl"),
        help="records file (default: bundled synthetic fixture)",
    )
    parser.add_argument("--out-dir", default="pipeline_out")
    parser.add_argument("--n", type=int, default=20, help="posts to evaluate")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--dev-fraction", type=float, default=None,
        help="hold out a dev split instead of the memorization setting",
    )
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    run(["validate", args.records])
    run(["stats", args.records, "--out", str(out / "stats.json")])
    for scheme in ("cs", "sc", "s"):
        run([
            "build", args.records, "--scheme", scheme,
            "--seed", str(args.seed), "--out", str(out / f"corpus_{scheme}.jsonl"),
        ])
    eval_args = [
        "eval", args.records, "--n", str(args.n), "--seed", str(args.seed),
        "--build-seed", str(args.seed), "--out-dir", str(out / "eval"),
    ]
    if args.dev_fraction is not None:
        eval_args += ["--dev-fraction", str(args.dev_fraction)]
    run(eval_args)

    print(f"\nartifacts written under {out}/")
    for path in sorted(out.rglob("*")):
        if path.is_file():
            print(f"  {path.relative_to(out)}")


if __name__ == "__main__":
    main()
