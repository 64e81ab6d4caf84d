"""Toolkit for structured implied-stereotype annotations.

Annotations are (targeted group, relation, implied statement) tuples with
a free-text conceptualisation of at most three words. The toolkit parses
and validates them, serializes training corpora under three concatenation
schemes, runs pluggable generation backends (with an offline retrieval
baseline), and evaluates outputs with automatic proxy metrics.
"""

from .backend import (
    Backend,
    BackendDescriptor,
    BackendError,
    BaselineBackend,
    GenerationRequest,
    GenerationResult,
    MalformedPrefixError,
    StdioBackendClient,
    TrainingConfig,
    baseline_train,
    serve_stdio,
)
from .core import (
    EOS,
    SEP,
    Annotation,
    AnnotatorDemographics,
    Conceptualisation,
    Post,
    PostSource,
    Relation,
    RuleCode,
    Scheme,
    StereotypeTuple,
    validate_annotation,
)
from .dataset import (
    CorpusManifest,
    CorpusStats,
    IngestError,
    export,
    ingest,
    load_corpus,
    split,
    stats,
    write_corpus,
)
from .evaluation import (
    EvalRun,
    ProxyMetrics,
    jaccard,
    load_run,
    overlap_tokens,
    render_html,
    render_markdown,
    run_eval,
    sample_dev,
    save_run,
    write_report,
)
from .grammar import (
    ParsedOutput,
    ParseFailure,
    TupleParseError,
    parse_scheme_output,
    parse_tuple,
    render_tuple,
)
from .serializer import (
    InvalidAnnotationError,
    SerializationError,
    SerializerConfig,
    TrainingInstance,
    build_corpus,
    eval_prefix,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotatorDemographics",
    "Backend",
    "BackendDescriptor",
    "BackendError",
    "BaselineBackend",
    "Conceptualisation",
    "CorpusManifest",
    "CorpusStats",
    "EOS",
    "EvalRun",
    "GenerationRequest",
    "GenerationResult",
    "IngestError",
    "InvalidAnnotationError",
    "MalformedPrefixError",
    "ParseFailure",
    "ParsedOutput",
    "Post",
    "PostSource",
    "ProxyMetrics",
    "Relation",
    "RuleCode",
    "SEP",
    "Scheme",
    "SerializationError",
    "SerializerConfig",
    "StdioBackendClient",
    "StereotypeTuple",
    "TrainingConfig",
    "TrainingInstance",
    "TupleParseError",
    "baseline_train",
    "build_corpus",
    "eval_prefix",
    "export",
    "ingest",
    "jaccard",
    "load_corpus",
    "load_run",
    "overlap_tokens",
    "parse_scheme_output",
    "parse_tuple",
    "render_tuple",
    "run_eval",
    "sample_dev",
    "save_run",
    "serialize",
    "serve_stdio",
    "split",
    "stats",
    "validate_annotation",
    "write_corpus",
    "write_report",
]
