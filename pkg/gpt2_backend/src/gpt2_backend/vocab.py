"""Word-level vocabulary derived from a training corpus.

The markers [SEP] and [EOS] are first-class reserved tokens with fixed ids,
alongside [PAD] and [UNK]. Tokenization is whitespace splitting: one vocab
entry per distinct word, which keeps the model-token count of any candidate
equal to its whitespace word count.
"""

import json
from pathlib import Path
from typing import Iterable, Sequence

PAD = "[PAD]"
UNK = "[UNK]"
SEP = "[SEP]"
EOS = "[EOS]"
SPECIALS = (PAD, UNK, SEP, EOS)


class Vocab:
    def __init__(self, words: Sequence[str]):
        # specials occupy ids 0..3 regardless of corpus content
        self.tokens = list(SPECIALS) + [w for w in words if w not in SPECIALS]
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate words in vocabulary")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.pad_id = self.index[PAD]
        self.unk_id = self.index[UNK]
        self.sep_id = self.index[SEP]
        self.eos_id = self.index[EOS]

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        words = set()
        for text in texts:
            words.update(text.split())
        return cls(sorted(words - set(SPECIALS)))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(tok, self.unk_id) for tok in text.split()]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(
            self.tokens[i] for i in ids if 0 <= i < len(self.tokens) and i != self.pad_id
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"tokens": self.tokens}, ensure_ascii=False, indent=2),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))["tokens"]
        if tokens[: len(SPECIALS)] != list(SPECIALS):
            raise ValueError("vocabulary file does not start with the reserved tokens")
        return cls(tokens[len(SPECIALS):])
