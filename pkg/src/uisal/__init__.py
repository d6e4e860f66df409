"""Element-level saliency prediction for mobile UI screenshots."""

from uisal.errors import (
    ConfigError,
    DataError,
    DegenerateCalibrationError,
    EmptyFixationError,
    InsufficientDataError,
    NotFittedError,
    NumericError,
    ShapeError,
    UisalError,
    UsageError,
)
from uisal.features import BoundingBox, UiElement, UiScreen
from uisal.gaze import (
    GazeCalibrator,
    GazeSession,
    fit_calibration,
    fixations_to_pixel_saliency,
    screen_ground_truth,
)
from uisal.metrics import MetricReport, auc, cc, crossval, evaluate_dataset, kl
from uisal.model import (
    SaliencyModel,
    SaliencyPredictor,
    TrainConfig,
    fit_predictor,
    predict_ui,
    pretrain_autoencoder,
)
from uisal.synth import SynthConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ConfigError",
    "DataError",
    "DegenerateCalibrationError",
    "EmptyFixationError",
    "GazeCalibrator",
    "GazeSession",
    "InsufficientDataError",
    "MetricReport",
    "NotFittedError",
    "NumericError",
    "SaliencyModel",
    "SaliencyPredictor",
    "ShapeError",
    "SynthConfig",
    "TrainConfig",
    "UiElement",
    "UiScreen",
    "UisalError",
    "UsageError",
    "auc",
    "cc",
    "crossval",
    "evaluate_dataset",
    "fit_calibration",
    "fit_predictor",
    "fixations_to_pixel_saliency",
    "generate_dataset",
    "kl",
    "predict_ui",
    "pretrain_autoencoder",
    "screen_ground_truth",
    "__version__",
]
