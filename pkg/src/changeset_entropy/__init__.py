"""Cross-entropy of source-code changesets versus per-revision energy deltas."""

__version__ = "0.1.0"

from .energy import EnergyDelta, EnergyProfile, compute_deltas, load_profile
from .lexer import Token, TokenKind, TokenStream, is_cpp_path, tokenize_lines, tokenize_source
from .lm import (
    EntropyResult,
    NGramModel,
    build_model,
    cross_entropy,
    export_arpa,
    import_arpa,
    probability,
)
from .pipeline import EntropyRecord, WindowResult, run_part1, run_part2, run_part3
from .stats import box_summary, filter_entropy_outliers, group_by_abs_delta, pearson
from .vcs import Changeset, checkout_corpus, extract_changesets, parse_unified_diff

__all__ = [
    "Changeset",
    "EnergyDelta",
    "EnergyProfile",
    "EntropyRecord",
    "EntropyResult",
    "NGramModel",
    "Token",
    "TokenKind",
    "TokenStream",
    "WindowResult",
    "box_summary",
    "build_model",
    "checkout_corpus",
    "compute_deltas",
    "cross_entropy",
    "export_arpa",
    "extract_changesets",
    "filter_entropy_outliers",
    "group_by_abs_delta",
    "import_arpa",
    "is_cpp_path",
    "load_profile",
    "parse_unified_diff",
    "pearson",
    "probability",
    "run_part1",
    "run_part2",
    "run_part3",
    "tokenize_lines",
    "tokenize_source",
]
