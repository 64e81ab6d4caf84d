"""Model construction: a small causal transformer built from scratch.

No pretrained weights are downloaded or loaded; the architecture is the
GPT-2 block structure at desk-scale sizes. The size is picked with the
GPT2_BACKEND_SIZE environment variable (default: the smallest) and is
recorded in the serving descriptor so runs are attributable.
"""

import os

from transformers import GPT2Config, GPT2LMHeadModel

SIZE_ENV_VAR = "GPT2_BACKEND_SIZE"

SIZES = {
    "tiny": {"n_embd": 64, "n_layer": 2, "n_head": 2},
    "small": {"n_embd": 128, "n_layer": 4, "n_head": 4},
    "base": {"n_embd": 256, "n_layer": 8, "n_head": 8},
}

N_POSITIONS = 256


def pick_size(size: str | None = None) -> str:
    chosen = size or os.environ.get(SIZE_ENV_VAR, "tiny")
    if chosen not in SIZES:
        raise ValueError(
            f"unknown model size {chosen!r}; choose one of {sorted(SIZES)}"
        )
    return chosen


def describe_size(size: str) -> str:
    dims = SIZES[size]
    return f"{size}({dims['n_embd']}d,{dims['n_layer']}L,{dims['n_head']}H)"


def build_model(vocab_size: int, size: str | None = None) -> GPT2LMHeadModel:
    dims = SIZES[pick_size(size)]
    config = GPT2Config(
        vocab_size=vocab_size,
        n_positions=N_POSITIONS,
        bos_token_id=None,
        eos_token_id=3,
        pad_token_id=0,
        **dims,
    )
    return GPT2LMHeadModel(config)
