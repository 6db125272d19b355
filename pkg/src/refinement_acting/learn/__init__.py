"""Learning method policies and utility heuristics from simulated acting."""
from .data import STRATEGIES, LhRecord, LmRecord, generate_data, load_records, save_records
from .encoding import ContextEncoder, EncodingError
from .intervals import IntervalMap, fit_intervals
from .mlp import Mlp, MLPClassifier, TrainingDiverged, forward, loss_and_grad, softmax
from .models import Hyper, LearnedHeuristic, MethodPolicy, load_model, split_indices, train

__all__ = [
    "STRATEGIES", "LhRecord", "LmRecord", "generate_data", "load_records", "save_records",
    "ContextEncoder", "EncodingError", "IntervalMap", "fit_intervals",
    "Mlp", "MLPClassifier", "TrainingDiverged", "forward", "loss_and_grad", "softmax",
    "Hyper", "LearnedHeuristic", "MethodPolicy", "load_model", "split_indices", "train",
]
