from .layers import LSTM, Conv1D, Dense, Dropout, MaxPool1D, ReLU, Softmax, set_debug
from .loss import softmax, weighted_cross_entropy
from .model import Model, build_model, canonical_layers
from .optim import Adam
from .train import TrainConfig, TrainingDiverged, predict, train

__all__ = [
    "Adam", "Conv1D", "Dense", "Dropout", "LSTM", "MaxPool1D", "Model", "ReLU",
    "Softmax", "TrainConfig", "TrainingDiverged", "build_model", "canonical_layers",
    "predict", "set_debug", "softmax", "train", "weighted_cross_entropy",
]
