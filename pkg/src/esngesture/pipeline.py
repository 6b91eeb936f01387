"""End-to-end model: feature maps -> reservoir(s) -> readout."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import reservoir as rsv
from .config import PipelineConfig
from .datasets import SampleRecord
from .errors import ShapeError
from .features import FeatureMap, RdmSequence, concat_channels, extract_all, normalize
from .multi_reservoir import ReservoirBank, build_bank, run_bank
from .nonlinear_readouts import ForestConfig, SvmConfig, forest_fit, svm_fit
from .readout import Expansion, design_matrices, fit_ridge

__all__ = ["sample_maps", "map_signature", "Encoder", "build_encoder", "fit_readout",
           "TrainedModel", "fit", "train"]


def sample_maps(record: SampleRecord | RdmSequence | list, normalization: str) -> list[FeatureMap]:
    """Normalized feature maps of one sample, in model order."""
    payload = record.payload if isinstance(record, SampleRecord) else record
    maps = extract_all(payload) if isinstance(payload, RdmSequence) else list(payload)
    return [normalize(m, normalization) for m in maps]


def map_signature(maps: list[FeatureMap]) -> list[tuple[str, int]]:
    """``(kind, channels)`` per map; stored with models to catch reordering."""
    return [(m.kind.value, m.channels) for m in maps]


@dataclass(frozen=True, eq=False)
class Encoder:
    """Fixed reservoir part of a model, mapping samples to state vectors."""

    architecture: str
    bank: ReservoirBank
    signature: tuple[tuple[str, int], ...]
    normalization: str

    @property
    def state_dim(self) -> int:
        return self.bank.state_dim

    def check(self, maps: list[FeatureMap]) -> None:
        sig = tuple(map_signature(maps))
        if sig != self.signature:
            raise ShapeError(f"model expects feature maps {list(self.signature)}, sample provides {list(sig)}")

    def encode_maps(self, maps: list[FeatureMap]) -> np.ndarray:
        self.check(maps)
        if self.architecture == "single":
            return rsv.run(self.bank.reservoirs[0], concat_channels(maps))
        return run_bank(self.bank, maps).r

    def encode(self, record) -> np.ndarray:
        return self.encode_maps(sample_maps(record, self.normalization))

    def encode_many(self, records, threads: int = 1, timings: list | None = None) -> np.ndarray:
        """Row-stacked states; optional per-sample wall times appended to ``timings``."""
        def one(rec):
            t0 = time.perf_counter()
            x = self.encode(rec)
            return x, time.perf_counter() - t0

        if threads and threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                out = list(pool.map(one, records))
        else:
            out = [one(r) for r in records]
        if timings is not None:
            timings.extend(t for _, t in out)
        if not out:
            return np.zeros((0, self.state_dim))
        return np.stack([x for x, _ in out])


def build_encoder(cfg: PipelineConfig, example_maps: list[FeatureMap], seed_offset: int = 0) -> Encoder:
    sig = tuple(map_signature(example_maps))
    spec = cfg.reservoir.with_(seed=cfg.reservoir.seed + seed_offset)
    if cfg.architecture == "single":
        dims = [sum(c for _, c in sig)]
    else:
        dims = [c for _, c in sig]
    return Encoder(cfg.architecture, build_bank(spec, dims), sig, cfg.normalization)


def fit_readout(cfg: PipelineConfig, states: np.ndarray, labels: np.ndarray, n_classes: int):
    """Train the configured readout; every model exposes ``predict`` and ``decision``."""
    if cfg.readout in ("rr_l", "rr_n"):
        exp = Expansion.LINEAR if cfg.readout == "rr_l" else Expansion.TANH
        return fit_ridge(design_matrices(states, labels, n_classes, exp), cfg.ridge_lambda, exp)
    if cfg.readout == "svm":
        gamma = cfg.svm_gamma if cfg.svm_gamma == "scale" else float(cfg.svm_gamma)
        return svm_fit(states, labels, SvmConfig(cfg.svm_c, gamma, cfg.svm_tolerance), n_classes)
    return forest_fit(states, labels,
                      ForestConfig(cfg.forest_trees, "sqrt", cfg.forest_min_samples_leaf, cfg.seed),
                      n_classes)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: PipelineConfig
    encoder: Encoder
    readout: object
    classes: tuple[str, ...]

    def states(self, records, threads: int = 1) -> np.ndarray:
        return self.encoder.encode_many(records, threads)

    def scores(self, records, threads: int = 1) -> np.ndarray:
        return self.readout.decision(self.states(records, threads))

    def predict_indices(self, records, threads: int = 1) -> np.ndarray:
        return np.asarray(self.readout.predict(self.states(records, threads)), dtype=np.int64)

    def predict(self, records, threads: int = 1) -> list[str]:
        return [self.classes[i] for i in self.predict_indices(records, threads)]


def fit(cfg: PipelineConfig, records: list[SampleRecord], classes=None, threads: int = 1,
        seed_offset: int = 0) -> tuple[TrainedModel, np.ndarray]:
    """Train a model; also returns the training states (rows follow ``records``)."""
    if not records:
        raise ValueError("cannot train on zero records")
    classes = tuple(classes) if classes is not None else tuple(sorted({r.label for r in records}))
    enc = build_encoder(cfg, sample_maps(records[0], cfg.normalization), seed_offset)
    x = enc.encode_many(records, threads)
    y = np.array([classes.index(r.label) for r in records])
    return TrainedModel(cfg, enc, fit_readout(cfg, x, y, len(classes)), classes), x


def train(cfg: PipelineConfig, records: list[SampleRecord], classes=None, threads: int = 1,
          seed_offset: int = 0) -> TrainedModel:
    return fit(cfg, records, classes, threads, seed_offset)[0]
