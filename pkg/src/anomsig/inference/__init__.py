"""Statistical core: decomposition, truncation search, p-values."""

from .decomposition import Decomposition, TestInstance, decompose, test_statistic
from .permutation import permutation_p, permutation_p_explicit
from .pipeline import run_single_test
from .result import TestOutcome, intervals_from_json, intervals_to_json
from .search import SearchConfig, SearchOutcome, parametric_search, search_range
from .truncated import (
    TruncatedGaussian,
    bonferroni_p,
    bonferroni_p_from_log,
    log_naive_p,
    naive_p,
    oc_p,
    selective_p,
)

__all__ = [
    "TestInstance",
    "Decomposition",
    "test_statistic",
    "decompose",
    "TruncatedGaussian",
    "selective_p",
    "naive_p",
    "log_naive_p",
    "bonferroni_p",
    "bonferroni_p_from_log",
    "oc_p",
    "SearchConfig",
    "SearchOutcome",
    "search_range",
    "parametric_search",
    "permutation_p",
    "permutation_p_explicit",
    "run_single_test",
    "TestOutcome",
    "intervals_to_json",
    "intervals_from_json",
]
