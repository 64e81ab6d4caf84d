"""Generation-backend contract, offline retrieval baseline, stdio protocol.

A backend is anything with a ``descriptor`` attribute and a
``generate(request) -> GenerationResult`` method. Two implementations live
here: :class:`BaselineBackend`, a deterministic retrieval index that lets
the whole pipeline run with no neural dependency, and
:class:`StdioBackendClient`, which drives an out-of-process backend over
the line protocol (one JSON object per line on standard streams).

Protocol shapes:

* handshake (backend -> harness): the backend descriptor as one JSON line
* request: ``{"prefix": ..., "num_candidates": ..., "max_new_tokens": ...}``
* response: ``{"candidates": [...], "truncated_flags": [...]}``
* failure: ``{"error": {"code": ..., "message": ...}}`` in place of either

Running ``python -m costar.backend --corpus FILE`` serves a baseline
index over that protocol.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Protocol, Sequence

from .core import EOS, SEP, Scheme
from .serializer import TrainingInstance

DEFAULT_NUM_CANDIDATES = 3
DEFAULT_MAX_NEW_TOKENS = 50


class BackendError(RuntimeError):
    """Backend unavailable or misbehaving (protocol/IO failures)."""

    def __init__(self, message: str, code: str = "backend") -> None:
        super().__init__(message)
        self.code = code


class MalformedPrefixError(ValueError):
    """Prefix does not end with exactly one separator marker."""


@dataclass(frozen=True)
class GenerationRequest:
    """One generation call. Defaults: 3 candidates of at most 50 tokens."""

    prefix: str
    num_candidates: int = DEFAULT_NUM_CANDIDATES
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS

    def __post_init__(self) -> None:
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be positive")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")

    def to_dict(self) -> dict[str, object]:
        return {
            "prefix": self.prefix,
            "num_candidates": self.num_candidates,
            "max_new_tokens": self.max_new_tokens,
        }


@dataclass(frozen=True)
class TrainingConfig:
    """Fine-tuning settings echoed by neural backends.

    Defaults follow the training regime the toolkit targets: up to 5
    epochs, learning rate 1e-5, batch size 1, Adam, evaluation after each
    epoch. epochs above 5 are permitted (smoke tests overfit tiny corpora)
    but the default regime never exceeds it.
    """

    epochs: int = 5
    learning_rate: float = 1e-5
    batch_size: int = 1
    optimizer: str = "adam"
    eval_every_epoch: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def to_dict(self) -> dict[str, object]:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "eval_every_epoch": self.eval_every_epoch,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "TrainingConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity a backend announces at handshake.

    ``instance_id`` distinguishes repeated instances trained on the same
    scheme (the ablated scheme is typically trained twice). ``decoding``
    records the generation strategy, since the contract does not fix one.
    ``serial_only`` backends must not receive concurrent requests; the
    harness serializes calls to them.
    """

    name: str
    scheme: Scheme
    instance_id: int = 1
    decoding: str = ""
    serial_only: bool = False
    training: TrainingConfig | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.instance_id < 1:
            raise ValueError("instance_id must be at least 1")

    def default_label(self) -> str:
        return f"{self.scheme.value}#{self.instance_id}"

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "scheme": self.scheme.value,
            "instance_id": self.instance_id,
            "decoding": self.decoding,
            "serial_only": self.serial_only,
            "training": self.training.to_dict() if self.training else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "BackendDescriptor":
        training = data.get("training")
        return cls(
            name=str(data["name"]),
            scheme=Scheme(data["scheme"]),
            instance_id=int(data.get("instance_id", 1)),
            decoding=str(data.get("decoding", "")),
            serial_only=bool(data.get("serial_only", False)),
            training=TrainingConfig.from_dict(training) if training else None,
        )


@dataclass(frozen=True)
class GenerationResult:
    """Exactly num_candidates entries, aligned across all four tuples.

    ``flags`` holds per-candidate notes: "" for a clean candidate,
    "duplicate" when the backend had to repeat one, "padded" when it
    under-produced and an empty string fills the slot, "error:<msg>" when
    the harness substituted for a failed call. ``scores`` is optional
    backend-specific ranking information (the baseline records Jaccard
    overlap)."""

    candidates: tuple[str, ...]
    truncated_flags: tuple[bool, ...]
    flags: tuple[str, ...] = ()
    scores: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.flags:
            object.__setattr__(self, "flags", ("",) * len(self.candidates))
        lengths = {len(self.candidates), len(self.truncated_flags), len(self.flags)}
        if self.scores is not None:
            lengths.add(len(self.scores))
        if len(lengths) != 1:
            raise ValueError("result fields must have equal lengths")


class Backend(Protocol):
    descriptor: BackendDescriptor

    def generate(self, request: GenerationRequest) -> GenerationResult: ...


def check_prefix(prefix: str) -> str:
    """Validate the generate precondition; returns the query text (the
    prefix minus its trailing separator marker)."""
    stripped = prefix.rstrip()
    if not stripped.endswith(SEP):
        raise MalformedPrefixError("prefix must end with the separator marker")
    head = stripped[: -len(SEP)]
    if SEP in head or EOS in head:
        raise MalformedPrefixError("prefix must contain exactly one marker, at the end")
    head = head.strip()
    if not head:
        raise MalformedPrefixError("prefix has no text before the separator marker")
    return head


def _tokens(text: str) -> frozenset[str]:
    return frozenset(text.lower().split())


def _truncate(text: str, max_new_tokens: int) -> tuple[str, bool]:
    tokens = text.split()
    if len(tokens) <= max_new_tokens:
        return text, False
    return " ".join(tokens[:max_new_tokens]), True


@dataclass(frozen=True)
class _IndexEntry:
    post_id: str
    position: int
    query_tokens: frozenset[str]
    target: str


class BaselineBackend:
    """Deterministic retrieval stand-in for a trained generator.

    Ranks training posts by token-set Jaccard overlap with the query post
    (lowercase whitespace tokens), ties broken by post_id then corpus
    position, and returns the target segments of the best matches. When
    the corpus holds fewer posts than num_candidates the ranking is cycled
    and repeats are flagged "duplicate". Identical index and request give
    identical output. It exercises the pipeline; it does not model
    language.
    """

    def __init__(self, entries: Sequence[_IndexEntry], descriptor: BackendDescriptor):
        self._entries = list(entries)
        self.descriptor = descriptor

    @classmethod
    def train(
        cls,
        instances: Iterable[TrainingInstance],
        name: str = "baseline",
        instance_id: int = 1,
    ) -> "BaselineBackend":
        """Build the retrieval index from serialized instances.

        All instances must share one scheme (the descriptor echoes it);
        an empty corpus is rejected.
        """
        entries: list[_IndexEntry] = []
        schemes: set[Scheme] = set()
        for position, inst in enumerate(instances):
            head, sep, tail = inst.text.partition(SEP)
            if not sep:
                raise ValueError(
                    f"instance {inst.post_id!r} has no separator marker; "
                    "the index needs corpus-built texts"
                )
            schemes.add(Scheme(inst.scheme))
            entries.append(
                _IndexEntry(
                    post_id=inst.post_id,
                    position=position,
                    query_tokens=_tokens(head),
                    target=tail.strip(),
                )
            )
        if not entries:
            raise ValueError("cannot build a retrieval index from an empty corpus")
        if len(schemes) > 1:
            raise ValueError(f"instances mix schemes: {sorted(s.value for s in schemes)}")
        descriptor = BackendDescriptor(
            name=name,
            scheme=schemes.pop(),
            instance_id=instance_id,
            decoding="retrieval: jaccard ranking, ties by post_id",
        )
        return cls(entries, descriptor)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        query = _tokens(check_prefix(request.prefix))

        def jaccard(entry: _IndexEntry) -> float:
            union = query | entry.query_tokens
            if not union:
                return 1.0
            return len(query & entry.query_tokens) / len(union)

        ranked = sorted(
            self._entries,
            key=lambda e: (-jaccard(e), e.post_id, e.position),
        )
        candidates: list[str] = []
        truncated: list[bool] = []
        flags: list[str] = []
        scores: list[float] = []
        for i in range(request.num_candidates):
            entry = ranked[i % len(ranked)]
            text, cut = _truncate(entry.target, request.max_new_tokens)
            candidates.append(text)
            truncated.append(cut)
            flags.append("duplicate" if i >= len(ranked) else "")
            scores.append(jaccard(entry))
        return GenerationResult(
            candidates=tuple(candidates),
            truncated_flags=tuple(truncated),
            flags=tuple(flags),
            scores=tuple(scores),
        )


def baseline_train(
    instances: Iterable[TrainingInstance],
    name: str = "baseline",
    instance_id: int = 1,
) -> BaselineBackend:
    """Convenience wrapper over :meth:`BaselineBackend.train`."""
    return BaselineBackend.train(instances, name=name, instance_id=instance_id)


def _error_line(code: str, message: str) -> str:
    return json.dumps({"error": {"code": code, "message": message}}, ensure_ascii=False)


def serve_stdio(backend: Backend, stdin: IO[str], stdout: IO[str]) -> None:
    """Serve a backend over the line protocol until end of input.

    The first output line is the handshake descriptor. Per-request
    failures answer with an error object and the loop continues, so one
    bad request never kills the server.
    """
    stdout.write(json.dumps(backend.descriptor.to_dict(), ensure_ascii=False) + "\n")
    stdout.flush()
    for line in stdin:
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            request = GenerationRequest(
                prefix=str(raw["prefix"]),
                num_candidates=int(raw.get("num_candidates", DEFAULT_NUM_CANDIDATES)),
                max_new_tokens=int(raw.get("max_new_tokens", DEFAULT_MAX_NEW_TOKENS)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            stdout.write(_error_line("bad_request", str(err)) + "\n")
            stdout.flush()
            continue
        try:
            result = backend.generate(request)
            response = {
                "candidates": list(result.candidates),
                "truncated_flags": list(result.truncated_flags),
            }
            stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        except MalformedPrefixError as err:
            stdout.write(_error_line("malformed_prefix", str(err)) + "\n")
        except Exception as err:  # noqa: BLE001 - report, keep serving
            stdout.write(_error_line("generate_failed", str(err)) + "\n")
        stdout.flush()


class StdioBackendClient:
    """Drive a child-process backend speaking the line protocol.

    Reads the handshake descriptor at startup and exposes the same
    generate interface as in-process backends. Short responses are padded
    with empty strings and flagged "padded"; error responses raise
    :class:`BackendError` (or :class:`MalformedPrefixError` for rejected
    prefixes). Usable as a context manager.
    """

    def __init__(self, command: Sequence[str]):
        self._command = list(command)
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as err:
            raise BackendError(f"cannot launch backend {self._command!r}: {err}") from err
        handshake = self._read_line()
        if "error" in handshake:
            detail = handshake["error"]
            self.close()
            raise BackendError(
                f"backend refused to start: {detail.get('message', detail)}",
                code=str(detail.get("code", "startup")),
            )
        try:
            self.descriptor = BackendDescriptor.from_dict(handshake)
        except (KeyError, TypeError, ValueError) as err:
            self.close()
            raise BackendError(f"bad handshake line: {err}") from err

    def _read_line(self) -> dict:
        assert self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            self.close()
            raise BackendError("backend closed its output stream")
        try:
            data = json.loads(line)
        except json.JSONDecodeError as err:
            raise BackendError(f"backend wrote a non-JSON line: {line!r}") from err
        if not isinstance(data, dict):
            raise BackendError(f"backend wrote a non-object line: {line!r}")
        return data

    def generate(self, request: GenerationRequest) -> GenerationResult:
        assert self._proc.stdin is not None
        if self._proc.poll() is not None:
            raise BackendError("backend process has exited")
        try:
            self._proc.stdin.write(json.dumps(request.to_dict(), ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise BackendError(f"backend pipe failed: {err}") from err
        data = self._read_line()
        if "error" in data:
            detail = data["error"]
            message = str(detail.get("message", detail))
            if detail.get("code") == "malformed_prefix":
                raise MalformedPrefixError(message)
            raise BackendError(message, code=str(detail.get("code", "generate")))
        try:
            candidates = [str(c) for c in data["candidates"]]
            truncated = [bool(t) for t in data["truncated_flags"]]
        except (KeyError, TypeError) as err:
            raise BackendError(f"bad response shape: {err}") from err
        flags = [""] * len(candidates)
        while len(candidates) < request.num_candidates:
            candidates.append("")
            truncated.append(False)
            flags.append("padded")
        del candidates[request.num_candidates:]
        del truncated[request.num_candidates:]
        del flags[request.num_candidates:]
        return GenerationResult(
            candidates=tuple(candidates),
            truncated_flags=tuple(truncated),
            flags=tuple(flags),
        )

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self) -> "StdioBackendClient":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def main(argv: Sequence[str] | None = None) -> int:
    """Serve a baseline backend over stdio: the corpus file provides both
    the index and the scheme."""
    parser = argparse.ArgumentParser(
        prog="python -m costar.backend",
        description="serve a retrieval baseline over the stdio line protocol",
    )
    parser.add_argument("--corpus", required=True, help="serialized corpus (jsonl)")
    parser.add_argument("--name", default="baseline")
    parser.add_argument("--instance-id", type=int, default=1)
    args = parser.parse_args(argv)

    from .dataset import load_corpus

    try:
        backend = BaselineBackend.train(
            load_corpus(args.corpus), name=args.name, instance_id=args.instance_id
        )
    except (OSError, ValueError) as err:
        sys.stdout.write(_error_line("startup", str(err)) + "\n")
        sys.stdout.flush()
        return 3
    serve_stdio(backend, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
