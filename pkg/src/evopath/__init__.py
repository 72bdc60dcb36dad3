"""Meta-path discovery over typed knowledge graphs."""
from ._backend import BACKEND
from .atoms import AtomCatalog, build_catalog, gestalt_similarity
from .cleaner import CleanReport, clean
from .errors import (
    ConfigError, EvoPathError, HinFormatError, HinValidationError, NoSupportError, ProviderError,
    RunAborted, UnknownAtomError,
)
from .evaluation import (
    EvalReport, average_precision, evaluate_kbc, evaluate_lp, kbc_metrics, roc_auc,
)
from .evolution import RunConfig, RunResult, run
from .generator import PromptSpec, ProviderConfig, build_prompt, parse_generation
from .hin import Hin, augment_inverses, build_schema_graph, load_hin
from .matcher import MetaPath, MetaPathScore, match_pairs, score_metapath
from .replay import BufferConfig, ReplayBuffer, ScoredMetaPath
from .sampler import WalkConfig, rng_stream, sample_paths

__version__ = "0.1.0"
