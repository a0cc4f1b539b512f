"""Index return prediction from constituent stocks: latent fusion, binary
encoding classification and confidence-guided trading."""

from .codec import N_BITS, TargetScaler, decode, encode, scale_to_unit, unscale
from .model import ModelConfig, ModelParams, PredictionOutput, forward, init_params
from .training import TrainConfig, train

__all__ = [
    "N_BITS", "TargetScaler", "decode", "encode", "scale_to_unit", "unscale",
    "ModelConfig", "ModelParams", "PredictionOutput", "forward", "init_params",
    "TrainConfig", "train",
]

__version__ = "0.1.0"
