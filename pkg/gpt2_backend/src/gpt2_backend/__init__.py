"""Neural generation backend for serialized annotation corpora.

Trains a small causal language model from scratch on corpus JSONL files and
serves completions over the newline-delimited JSON stdio protocol. The only
couplings to the annotation toolkit are those two external interfaces; this
package imports none of its code.
"""

from .model import SIZE_ENV_VAR, SIZES, build_model, describe_size, pick_size
from .serving import (
    Checkpoint,
    PrefixError,
    check_prefix,
    descriptor,
    generate,
    load_checkpoint,
    serve_stdio,
)
from .training import (
    CorpusError,
    FineTuneJob,
    FineTuneResult,
    TrainingConfig,
    finetune,
    load_instances,
)
from .vocab import EOS, PAD, SEP, SPECIALS, UNK, Vocab

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "CorpusError",
    "EOS",
    "FineTuneJob",
    "FineTuneResult",
    "PAD",
    "PrefixError",
    "SEP",
    "SIZES",
    "SIZE_ENV_VAR",
    "SPECIALS",
    "TrainingConfig",
    "UNK",
    "Vocab",
    "build_model",
    "check_prefix",
    "describe_size",
    "descriptor",
    "finetune",
    "generate",
    "load_checkpoint",
    "load_instances",
    "pick_size",
    "serve_stdio",
]
