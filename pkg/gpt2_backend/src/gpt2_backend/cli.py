"""Command line entry points: finetune a corpus, serve a checkpoint."""

import argparse
import json
import sys

from .model import SIZE_ENV_VAR, SIZES
from .training import CorpusError, FineTuneJob, TrainingConfig, finetune


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpt2-backend",
        description="Train and serve a small causal language model over the "
        "stdio generation protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("finetune", help="train on a serialized corpus file")
    train.add_argument("--corpus", required=True)
    train.add_argument("--out", required=True, help="checkpoint directory")
    train.add_argument("--epochs", type=int, default=5)
    train.add_argument("--lr", type=float, default=1e-5)
    train.add_argument("--batch-size", type=int, default=1)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument(
        "--size", choices=sorted(SIZES), default=None,
        help=f"model size (default: ${SIZE_ENV_VAR} or tiny)",
    )

    serve = sub.add_parser("serve", help="serve a checkpoint over stdio")
    serve.add_argument("--checkpoint", required=True)
    serve.add_argument("--name", default="gpt2")
    serve.add_argument("--instance-id", type=int, default=1)
    serve.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    # keep stderr readable and the stdout protocol stream clean
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()

    if args.command == "finetune":
        try:
            config = TrainingConfig(
                epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size
            )
            result = finetune(
                FineTuneJob(
                    corpus_path=args.corpus,
                    checkpoint_dir=args.out,
                    config=config,
                    seed=args.seed,
                    size=args.size,
                )
            )
        except (CorpusError, ValueError, OSError) as exc:
            print(f"finetune failed: {exc}", file=sys.stderr)
            return 3
        for epoch, mean in enumerate(result.epoch_mean_losses, start=1):
            print(f"epoch {epoch}: mean train loss {mean:.4f}")
        print(f"checkpoints: {', '.join(str(c) for c in result.checkpoints)}")
        return 0

    # serve: startup failures are reported on stdout as an error line so a
    # connecting client sees a structured handshake failure, then exit 3
    from .serving import load_checkpoint, serve_stdio

    try:
        checkpoint = load_checkpoint(args.checkpoint)
    except Exception as exc:
        print(
            json.dumps({"error": {"code": "startup_failed", "message": str(exc)}}),
            flush=True,
        )
        return 3
    serve_stdio(checkpoint, name=args.name, instance_id=args.instance_id, seed=args.seed)
    return 0


def main_entry() -> None:
    sys.exit(main())
