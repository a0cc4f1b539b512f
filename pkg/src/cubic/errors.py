"""Exception hierarchy; the CLI maps each class to an error category."""


class CubicError(Exception):
    category = "error"


class DataError(CubicError, ValueError):
    category = "data"


class ConfigError(CubicError, ValueError):
    category = "config"


class DegenerateMetricError(CubicError, ArithmeticError):
    category = "metric"


class RuinError(CubicError, ArithmeticError):
    category = "backtest"


class TrainingDivergedError(CubicError, FloatingPointError):
    category = "train"


class CheckpointError(CubicError, ValueError):
    category = "checkpoint"


class NonFiniteActivationError(CubicError, FloatingPointError):
    category = "model"

    def __init__(self, layer: str):
        super().__init__(f"non-finite activations after layer {layer}")
        self.layer = layer
