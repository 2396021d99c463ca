"""EMG wrist-intent pipeline: gesture recognition and force estimation.

Eight surface-EMG channels are rectified, low-passed and MVC-normalized,
channels are ranked with mRMR, windows are expanded into time and spatial
features and reduced with PCA. A KNN classifier gives the gesture and a
regression tree gives the normalized force. The same model runs in batch
(:mod:`wristemg.pipeline`, :mod:`wristemg.evaluation`) and frame by frame
(:mod:`wristemg.stream`).
"""
from .config import RunConfig, load_config
from .core import CHANNELS, Dataset, GestureLabel, Hand, LabelInterval, Sequence, load_dataset, save_dataset
from .models import PipelineModel, load_model, save_model
from .pipeline import fit_pipeline, predict_sequence
from .stream import StreamEngine, map_control
from .synthgen import SynthSpec, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "CHANNELS", "Dataset", "GestureLabel", "Hand", "LabelInterval", "PipelineModel", "RunConfig", "Sequence",
    "StreamEngine", "SynthSpec", "fit_pipeline", "generate_dataset", "load_config", "load_dataset", "load_model",
    "map_control", "predict_sequence", "save_dataset", "save_model",
]
