"""SMO training of kernel SVMs with a policy-driven kernel-row cache."""

from .cache import (
    POLICIES,
    CacheConfig,
    CacheStats,
    KernelCache,
    checkpoint_interval,
    estimate_benefit,
    evict_candidate,
    stats_document,
)
from .dataset import Dataset, DatasetError, SparseInstance, binarize_labels, dump_libsvm, load_libsvm, parse_libsvm
from .kernels import KernelParams, KernelRow, compute_kernel_rows, kernel_value, precompute_self_dots
from .model import OneVsAllModel, SvmModel, load_model, save_model
from .simulator import belady_opt_replay, compare_strategies, replay_trace
from .solver import SolverConfig, TrainResult, make_cache, train_binary, train_multioutput
from .trace import AccessTrace, load_trace, reuse_interval_cdf_by_stage, frequency_difference_by_stage, save_trace

__all__ = [
    "POLICIES",
    "AccessTrace",
    "CacheConfig",
    "CacheStats",
    "Dataset",
    "DatasetError",
    "KernelCache",
    "KernelParams",
    "KernelRow",
    "OneVsAllModel",
    "SolverConfig",
    "SparseInstance",
    "SvmModel",
    "TrainResult",
    "belady_opt_replay",
    "binarize_labels",
    "checkpoint_interval",
    "compare_strategies",
    "compute_kernel_rows",
    "dump_libsvm",
    "estimate_benefit",
    "evict_candidate",
    "frequency_difference_by_stage",
    "kernel_value",
    "load_libsvm",
    "load_model",
    "load_trace",
    "make_cache",
    "parse_libsvm",
    "precompute_self_dots",
    "replay_trace",
    "reuse_interval_cdf_by_stage",
    "save_model",
    "save_trace",
    "stats_document",
    "train_binary",
    "train_multioutput",
]
