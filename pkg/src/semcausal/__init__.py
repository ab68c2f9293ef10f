"""Causal-graph reasoning datasets, semantic-loss training, and collapse
diagnostics, reproducible end to end from seeds."""

__version__ = "0.1.0"

from .graphs import (
    ChainConfig,
    Dag,
    DagConfig,
    d_separated,
    descendants,
    enumerate_undirected_paths,
    find_path,
    generate_chain,
    generate_dag,
    is_blocked,
)
from .textio import (
    Example,
    Query,
    TokenSequence,
    parse_hypothesis,
    parse_premise,
    render_hypothesis,
    render_premise,
    tokenize,
)
from .data import (
    AdversarialSpec,
    GenerationSpec,
    ValidationReport,
    generate_adversarial,
    generate_suite,
    read_jsonl,
    validate_file,
    write_jsonl,
)
from .loss import (
    ConsistencyScore,
    LambdaSchedule,
    PredictionProbs,
    consistency,
    cross_entropy,
    lambda_at,
    semantic_loss_batch,
    total_loss,
)
from .model import ModelParams, forward, load_model, save_model
from .training import TrainConfig, TrainLog, gradient_check, init_model, train
from .evaluate import (
    CollapseReport,
    ConfusionMatrix,
    EvalReport,
    Metrics,
    compute_confusion,
    compute_metrics,
    detect_collapse,
    emit_report,
    evaluate_suites,
    predict_dataset,
)

__all__ = [
    "__version__",
    "ChainConfig",
    "Dag",
    "DagConfig",
    "d_separated",
    "descendants",
    "enumerate_undirected_paths",
    "find_path",
    "generate_chain",
    "generate_dag",
    "is_blocked",
    "Example",
    "Query",
    "TokenSequence",
    "parse_hypothesis",
    "parse_premise",
    "render_hypothesis",
    "render_premise",
    "tokenize",
    "AdversarialSpec",
    "GenerationSpec",
    "ValidationReport",
    "generate_adversarial",
    "generate_suite",
    "read_jsonl",
    "validate_file",
    "write_jsonl",
    "ConsistencyScore",
    "LambdaSchedule",
    "PredictionProbs",
    "consistency",
    "cross_entropy",
    "lambda_at",
    "semantic_loss_batch",
    "total_loss",
    "ModelParams",
    "forward",
    "load_model",
    "save_model",
    "TrainConfig",
    "TrainLog",
    "gradient_check",
    "init_model",
    "train",
    "CollapseReport",
    "ConfusionMatrix",
    "EvalReport",
    "Metrics",
    "compute_confusion",
    "compute_metrics",
    "detect_collapse",
    "emit_report",
    "evaluate_suites",
    "predict_dataset",
]
