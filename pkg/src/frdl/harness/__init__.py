from frdl.harness.benchmark import BenchmarkRow, benchmark_csv, benchmark_jump
from frdl.harness.config import TrainConfig, load_config, parse_config_text
from frdl.harness.evaluate import ConfusionMatrix, Metrics, confusion_matrix, evaluate, evaluate_features
from frdl.harness.preprocess import FeatureSequence, preprocess_dataset, preprocess_sample
from frdl.harness.train import TrainResult, fit, train

__all__ = [
    "BenchmarkRow", "benchmark_csv", "benchmark_jump", "TrainConfig", "load_config",
    "parse_config_text", "ConfusionMatrix", "Metrics", "confusion_matrix", "evaluate",
    "evaluate_features", "FeatureSequence", "preprocess_dataset", "preprocess_sample",
    "TrainResult", "fit", "train",
]
