"""Occlusion-robust dynamic hand-gesture recognition on synthetic keypoint streams."""
from .codec import GestureTemplate, SymbolSequence, encode_value, normalize_sequence
from .datagen import NoiseSpec, SampleSet, synth_dataset, validate_dataset
from .errors import GestureError, RefusedTooOccluded
from .experiments import Pipeline, RunConfig, SweepReport, run_accuracy, train_models
from .gan import GanModel, gan_sample, gan_train
from .hand import KEYPOINTS, DeltaFrame, HandFrame, KeypointId
from .predictor import PredictorModel, TrainConfig, train_predictor
from .recognizer import FrameBuffer, MatchResult, recognize

__all__ = [
    "DeltaFrame", "FrameBuffer", "GanModel", "GestureError", "GestureTemplate", "HandFrame",
    "KEYPOINTS", "KeypointId", "MatchResult", "NoiseSpec", "Pipeline", "PredictorModel",
    "RefusedTooOccluded", "RunConfig", "SampleSet", "SweepReport", "SymbolSequence",
    "TrainConfig", "encode_value", "gan_sample", "gan_train", "normalize_sequence",
    "recognize", "run_accuracy", "synth_dataset", "train_models", "train_predictor",
    "validate_dataset",
]
