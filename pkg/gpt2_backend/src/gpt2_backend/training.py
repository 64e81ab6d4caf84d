"""Training loop: fit the language model on a serialized corpus file.

Input is the corpus JSONL format written by the annotation toolkit's build
step: one {"post_id", "scheme", "text"} object per line, where text is
"post [SEP] ... [EOS]". One checkpoint directory is written per completed
epoch and every optimizer step's loss is appended to losses.jsonl.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from transformers.utils import logging as hf_logging

from .model import build_model, pick_size
from .vocab import EOS, SEP, Vocab


class CorpusError(ValueError):
    """A corpus line does not look like a serialized training instance."""


@dataclass
class TrainingConfig:
    epochs: int = 5
    learning_rate: float = 1e-5
    batch_size: int = 1
    optimizer: str = "adam"
    eval_every_epoch: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}; only 'adam'")

    def to_dict(self) -> dict[str, object]:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "eval_every_epoch": self.eval_every_epoch,
        }


@dataclass
class FineTuneJob:
    corpus_path: str | Path
    checkpoint_dir: str | Path
    config: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0
    size: str | None = None


@dataclass
class FineTuneResult:
    checkpoints: list[Path]
    epoch_mean_losses: list[float]
    eval_losses: list[float]
    step_losses: list[float]
    scheme: str
    vocab_size: int
    size: str


def load_instances(path: str | Path) -> list[dict[str, str]]:
    """Read and sanity-check corpus lines; raises CorpusError with the line number."""
    instances = []
    scheme = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: not JSON: {exc}") from exc
            if not isinstance(record, dict) or not isinstance(record.get("text"), str):
                raise CorpusError(f"line {lineno}: missing text field")
            text = record["text"]
            if SEP not in text or not text.endswith(EOS):
                raise CorpusError(
                    f"line {lineno}: text lacks the separator/end-marker structure"
                )
            record_scheme = record.get("scheme")
            if not isinstance(record_scheme, str) or not record_scheme:
                raise CorpusError(f"line {lineno}: missing scheme field")
            if scheme is None:
                scheme = record_scheme
            elif record_scheme != scheme:
                raise CorpusError(
                    f"line {lineno}: mixed schemes ({record_scheme!r} after {scheme!r})"
                )
            instances.append(record)
    if not instances:
        raise CorpusError(f"{path}: no instances")
    return instances


def _batches(encoded: Sequence[torch.Tensor], batch_size: int, pad_id: int):
    for start in range(0, len(encoded), batch_size):
        chunk = encoded[start : start + batch_size]
        width = max(len(t) for t in chunk)
        input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
        attention = torch.zeros((len(chunk), width), dtype=torch.long)
        labels = torch.full((len(chunk), width), -100, dtype=torch.long)
        for row, ids in enumerate(chunk):
            input_ids[row, : len(ids)] = ids
            attention[row, : len(ids)] = 1
            labels[row, : len(ids)] = ids
        yield input_ids, attention, labels


def _mean_corpus_loss(model, encoded, batch_size, pad_id) -> float:
    model.eval()
    losses = []
    with torch.no_grad():
        for input_ids, attention, labels in _batches(encoded, batch_size, pad_id):
            out = model(input_ids=input_ids, attention_mask=attention, labels=labels)
            losses.append(out.loss.item())
    return sum(losses) / len(losses)


def finetune(job: FineTuneJob) -> FineTuneResult:
    hf_logging.disable_progress_bar()
    config = job.config
    instances = load_instances(job.corpus_path)
    scheme = instances[0]["scheme"]
    texts = [record["text"] for record in instances]
    vocab = Vocab.from_texts(texts)
    size = pick_size(job.size)

    torch.manual_seed(job.seed)
    model = build_model(len(vocab), size)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    encoded = [torch.tensor(vocab.encode(t), dtype=torch.long) for t in texts]

    out_dir = Path(job.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_log = open(out_dir / "losses.jsonl", "w", encoding="utf-8")

    checkpoints: list[Path] = []
    epoch_means: list[float] = []
    eval_losses: list[float] = []
    step_losses: list[float] = []
    try:
        for epoch in range(1, config.epochs + 1):
            model.train()
            epoch_losses = []
            for step, (input_ids, attention, labels) in enumerate(
                _batches(encoded, config.batch_size, vocab.pad_id), start=1
            ):
                optimizer.zero_grad()
                out = model(input_ids=input_ids, attention_mask=attention, labels=labels)
                out.loss.backward()
                optimizer.step()
                loss = out.loss.item()
                if not math.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch} step {step}: {loss}"
                    )
                epoch_losses.append(loss)
                step_losses.append(loss)
                loss_log.write(
                    json.dumps({"epoch": epoch, "step": step, "loss": loss}) + "\n"
                )
            loss_log.flush()
            epoch_means.append(sum(epoch_losses) / len(epoch_losses))
            if config.eval_every_epoch:
                eval_losses.append(
                    _mean_corpus_loss(model, encoded, config.batch_size, vocab.pad_id)
                )

            ckpt = out_dir / f"checkpoint-{epoch:04d}"
            model.save_pretrained(ckpt)
            vocab.save(ckpt / "vocab.json")
            meta = {
                "epoch": epoch,
                "seed": job.seed,
                "size": size,
                "scheme": scheme,
                "vocab_size": len(vocab),
                "config": config.to_dict(),
                "train_mean_loss": epoch_means[-1],
                "eval_mean_loss": eval_losses[-1] if config.eval_every_epoch else None,
            }
            (ckpt / "meta.json").write_text(
                json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
            )
            checkpoints.append(ckpt)
    finally:
        loss_log.close()

    return FineTuneResult(
        checkpoints=checkpoints,
        epoch_mean_losses=epoch_means,
        eval_losses=eval_losses,
        step_losses=step_losses,
        scheme=scheme,
        vocab_size=len(vocab),
        size=size,
    )
