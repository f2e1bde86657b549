"""Word Coverage Score audit engine.

Measures whether words that humans actually wrote remain reachable when a
language model's output is truncated by Top-k, Top-p or Min-p filters at a
given temperature. The audit forces each word's token path against a
next-token oracle and records per-step sufficient statistics; metrics and
sweeps are evaluated offline from those records.
"""

from .audit import (
    AuditRecord,
    NgramOracle,
    StepRecord,
    TraceOracle,
    audit_word_context,
    build_ngram_oracle,
    build_trace_oracle,
    load_trace,
    reachability,
    record_to_json,
    write_trace,
)
from .config import RunConfig, grid_configs, load_config
from .contexts import (
    ContextSample,
    CorpusIndex,
    find_contexts,
    heuristic_coherence,
    load_contexts,
    revalidate,
    write_contexts,
)
from .errors import (
    AlignmentError,
    AuditStepError,
    OracleError,
    ParseError,
    ReplayMissError,
    ShortageError,
    TemperatureError,
    TokenizerError,
    TraceSchemaError,
    UndefinedCorrelationError,
    ValidationError,
    VocabularyMismatchError,
    WcsError,
)
from .lexicon import (
    LexEntry,
    TargetSet,
    is_lexical,
    load_dictionary,
    load_frequency_list,
    load_target_set,
    select_targets,
    write_target_set,
)
from .metrics import (
    SweepPoint,
    WordScore,
    mean_word_reachability,
    pearson_log_freq,
    sweep,
    wcs,
    wcs_per_word,
)
from .sampling import (
    FilterConfig,
    StepStats,
    TempStats,
    compute_step_stats,
    softmax_at_temperature,
    survives,
    survives_min_p,
    survives_top_k,
    survives_top_p,
)
from .tokenizers import (
    ByteTokenizer,
    GreedyBpeTokenizer,
    TokenPath,
    WhitespaceTokenizer,
    align,
)

__version__ = "0.1.0"
