"""Bottom-up synthesis of spreadsheet string formulas from examples."""

from .dsl import (
    EvalError,
    EvalLimits,
    FormulaError,
    OpDescriptor,
    Task,
    Value,
    apply_op,
    eval_expr,
    op_table,
    parse_formula,
    render,
)
from .benchmarks import BenchmarkCase, load_benchmarks
from .model import (
    ModelConfig,
    ModelParams,
    TrainConfig,
    TrainRecord,
    forward_batch,
    init_params,
    load_params,
    save_params,
    train_classifier,
    train_op_classifier,
)
from .datagen import GenConfig, build_dataset, build_premise_dataset, load_dataset
from .search import (
    SearchConfig,
    SearchResult,
    ValueBank,
    bin_probability,
    extract_constants,
    heuristic_score,
    premise_filter,
    synthesize,
)
from .sigs import Signature, io_signature, model_features, vo_signature

__version__ = "0.1.0"

__all__ = [
    "BenchmarkCase", "EvalError", "EvalLimits", "FormulaError", "GenConfig",
    "ModelConfig", "ModelParams", "OpDescriptor", "SearchConfig", "SearchResult",
    "Signature", "Task", "TrainConfig", "TrainRecord", "Value", "ValueBank",
    "apply_op", "bin_probability", "build_dataset", "build_premise_dataset",
    "eval_expr", "extract_constants", "forward_batch", "heuristic_score",
    "init_params", "io_signature", "load_benchmarks", "load_dataset",
    "load_params", "model_features", "op_table", "parse_formula",
    "premise_filter", "render", "save_params", "synthesize",
    "train_classifier", "train_op_classifier", "vo_signature",
]
