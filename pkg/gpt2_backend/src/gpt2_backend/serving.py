"""Serve a trained checkpoint over the stdio line protocol.

Wire format (one JSON object per line):
  handshake out: {"name", "scheme", "instance_id", "decoding", "serial_only",
                  "training"}
  request in:    {"prefix": "... [SEP]", "num_candidates": 3,
                  "max_new_tokens": 50}
  response out:  {"candidates": [...], "truncated_flags": [...]}
  error out:     {"error": {"code": "...", "message": "..."}}

Requests are handled strictly one at a time; the handshake says so
(serial_only) and the calling harness queues accordingly.
"""

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import torch
from transformers import GPT2LMHeadModel

from .model import N_POSITIONS, describe_size
from .vocab import EOS, SEP, Vocab


class PrefixError(ValueError):
    """Query prefix does not end with a single trailing separator."""


@dataclass
class Checkpoint:
    model: GPT2LMHeadModel
    vocab: Vocab
    meta: dict


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not (path / "meta.json").exists():
        raise FileNotFoundError(f"{path} is not a checkpoint directory")
    model = GPT2LMHeadModel.from_pretrained(path)
    model.eval()
    vocab = Vocab.load(path / "vocab.json")
    meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
    return Checkpoint(model=model, vocab=vocab, meta=meta)


def check_prefix(prefix: str) -> None:
    if not isinstance(prefix, str) or not prefix.strip():
        raise PrefixError("prefix must be a non-empty string")
    if not prefix.rstrip().endswith(SEP):
        raise PrefixError(f"prefix must end with {SEP}")
    head = prefix.rstrip()[: -len(SEP)]
    if SEP in head or EOS in head:
        raise PrefixError("prefix must contain exactly one marker, at the end")
    if not head.strip():
        raise PrefixError("prefix has no text before the separator")


def _sample_ids(
    model: GPT2LMHeadModel,
    vocab: Vocab,
    prefix_ids: list[int],
    max_new_tokens: int,
    generator: torch.Generator,
) -> tuple[list[int], bool]:
    """One sampled continuation; returns (new ids, hit the token budget)."""
    ids = list(prefix_ids)
    produced: list[int] = []
    for _ in range(max_new_tokens):
        window = ids[-N_POSITIONS:]
        logits = model(input_ids=torch.tensor([window])).logits[0, -1]
        probs = torch.softmax(logits, dim=-1)
        probs[vocab.pad_id] = 0.0
        next_id = int(torch.multinomial(probs, 1, generator=generator).item())
        ids.append(next_id)
        produced.append(next_id)
        if next_id == vocab.eos_id:
            return produced, False
    return produced, True


def generate(
    checkpoint: Checkpoint,
    prefix: str,
    num_candidates: int = 3,
    max_new_tokens: int = 50,
    seed: int = 0,
) -> tuple[list[str], list[str]]:
    """Sample candidates for a prefix; flags are "" or "truncated".

    Sampling is seeded per (seed, candidate index), so repeating a request
    against the same checkpoint reproduces the same candidates.
    """
    check_prefix(prefix)
    if num_candidates < 1 or max_new_tokens < 1:
        raise ValueError("num_candidates and max_new_tokens must be positive")
    prefix_ids = checkpoint.vocab.encode(prefix)
    candidates = []
    flags = []
    with torch.no_grad():
        for i in range(num_candidates):
            generator = torch.Generator()
            generator.manual_seed(seed * 1000003 + i)
            ids, truncated = _sample_ids(
                checkpoint.model, checkpoint.vocab, prefix_ids, max_new_tokens, generator
            )
            candidates.append(checkpoint.vocab.decode(ids))
            flags.append("truncated" if truncated else "")
    return candidates, flags


def descriptor(
    checkpoint: Checkpoint, name: str, instance_id: int, seed: int
) -> dict[str, object]:
    return {
        "name": name,
        "scheme": checkpoint.meta["scheme"],
        "instance_id": instance_id,
        "decoding": (
            f"sampling: temperature 1.0, seed {seed}, "
            f"model {describe_size(checkpoint.meta['size'])}, "
            f"epoch {checkpoint.meta['epoch']}"
        ),
        "serial_only": True,
        "training": checkpoint.meta["config"],
    }


def _error_line(code: str, message: str) -> str:
    return json.dumps({"error": {"code": code, "message": message}}, ensure_ascii=False)


def serve_stdio(
    checkpoint: Checkpoint,
    name: str = "gpt2",
    instance_id: int = 1,
    seed: int = 0,
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
) -> None:
    """Handshake, then answer request lines until stdin closes.

    Request-level failures answer with an error line and keep serving.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    stdout.write(json.dumps(descriptor(checkpoint, name, instance_id, seed)) + "\n")
    stdout.flush()
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            prefix = request.get("prefix")
            num_candidates = int(request.get("num_candidates", 3))
            max_new_tokens = int(request.get("max_new_tokens", 50))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            stdout.write(_error_line("bad_request", str(exc)) + "\n")
            stdout.flush()
            continue
        try:
            candidates, flags = generate(
                checkpoint, prefix, num_candidates, max_new_tokens, seed
            )
            stdout.write(
                json.dumps(
                    {"candidates": candidates, "truncated_flags": flags},
                    ensure_ascii=False,
                )
                + "\n"
            )
        except PrefixError as exc:
            stdout.write(_error_line("malformed_prefix", str(exc)) + "\n")
        except Exception as exc:
            stdout.write(_error_line("generate_failed", f"{type(exc).__name__}: {exc}") + "\n")
        stdout.flush()
