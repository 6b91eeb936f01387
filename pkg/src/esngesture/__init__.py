"""Echo state network toolkit for FMCW radar hand-gesture recognition.

Pipeline: RDM sequences -> range/Doppler-time feature maps -> one reservoir
per map (or a single shared one) -> final states -> trained readout.
"""
from .config import PRESETS, PipelineConfig, load_config
from .datasets import SampleRecord, load, save
from .errors import (ConfigError, ConvergenceWarning, DatasetError, ESNGestureError,
                     EvaluationError, ModelFormatError, NumericalError, ParameterError,
                     ShapeError)
from .evaluation import EvalReport, plan_split, run_eval, time_pipeline
from .features import FeatureMap, MapKind, RdmSequence, compute_dtm, compute_rtm, extract_all
from .model_io import load_model, save_model
from .multi_reservoir import build_bank, run_bank
from .pipeline import TrainedModel, train
from .readout import fit_ridge
from .reservoir import DOPNET_SINGLE, SOLI_MULTI, SOLI_SINGLE, ReservoirSpec, build, run
from .synth import SynthSpec, synth_generate

__version__ = "0.1.0"
