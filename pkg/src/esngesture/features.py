"""Feature maps derived from range-Doppler map (RDM) sequences.

An RDM sequence is a ``(T, A, R, D)`` array: time frames, receive antennas,
range bins, Doppler bins. Summing each frame over Doppler gives the
range-time map (RTM); summing over range gives the Doppler-time map (DTM).
Micro-Doppler maps (MDMs) arrive already in time-major form and are wrapped
as-is.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "MapKind",
    "Normalization",
    "RdmSequence",
    "FeatureMap",
    "compute_rtm",
    "compute_dtm",
    "extract_all",
    "normalize",
    "concat_channels",
]


class MapKind(str, Enum):
    RTM = "RTM"
    DTM = "DTM"
    MDM = "MDM"


class Normalization(str, Enum):
    NONE = "none"
    PER_SAMPLE_MAX = "per-sample-max"
    LOG_PER_SAMPLE_MAX = "log-then-per-sample-max"


@dataclass(frozen=True)
class RdmSequence:
    """Nonnegative RDM frames of shape ``(T, A, R, D)``.

    Use :meth:`from_array` to ingest complex data: complex values are reduced
    to magnitude (or to power with ``power=True``).
    """

    frames: np.ndarray

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4:
            raise ShapeError(f"RDM sequence must be (T, A, R, D), got shape {f.shape}")
        if f.shape[0] < 1:
            raise ShapeError("RDM sequence needs at least one frame")
        if np.iscomplexobj(f) or f.dtype != np.float64:
            raise ParameterError("RdmSequence frames must be real float64; use from_array")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ParameterError("RDM values must be finite and nonnegative")

    @classmethod
    def from_array(cls, array, power: bool = False) -> "RdmSequence":
        a = np.asarray(array)
        if np.iscomplexobj(a) or power:
            a = np.abs(a)
            if power:
                a = a * a
        return cls(np.ascontiguousarray(a, dtype=np.float64))

    @property
    def steps(self) -> int:
        return self.frames.shape[0]

    @property
    def antennas(self) -> int:
        return self.frames.shape[1]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.frames.shape)


@dataclass(frozen=True)
class FeatureMap:
    """Time-major real feature map, ``values`` of shape ``(T, channels)``."""

    values: np.ndarray
    kind: MapKind = MapKind.MDM
    antenna: int | None = field(default=None, compare=False)

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1:
            raise ShapeError(f"feature map must be (T, channels) with T >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("feature map contains NaN or Inf")

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def _check_antenna(seq: RdmSequence, antenna: int) -> None:
    if not 0 <= antenna < seq.antennas:
        raise IndexError(f"antenna {antenna} out of range for {seq.antennas} antennas")


def compute_rtm(seq: RdmSequence, antenna: int = 0) -> FeatureMap:
    """Range-time map: each frame summed over the Doppler axis."""
    _check_antenna(seq, antenna)
    return FeatureMap(seq.frames[:, antenna].sum(axis=2), MapKind.RTM, antenna)


def compute_dtm(seq: RdmSequence, antenna: int = 0) -> FeatureMap:
    """Doppler-time map: each frame summed over the range axis."""
    _check_antenna(seq, antenna)
    return FeatureMap(seq.frames[:, antenna].sum(axis=1), MapKind.DTM, antenna)


def extract_all(seq: RdmSequence) -> list[FeatureMap]:
    """All maps of a sample, ordered ``[RTM_0, DTM_0, RTM_1, DTM_1, ...]``.

    Trained multi-reservoir models depend on this order.
    """
    maps = []
    for ant in range(seq.antennas):
        maps.append(compute_rtm(seq, ant))
        maps.append(compute_dtm(seq, ant))
    return maps


def normalize(fmap: FeatureMap, mode: Normalization | str = Normalization.PER_SAMPLE_MAX) -> FeatureMap:
    mode = Normalization(mode)
    if mode is Normalization.NONE:
        return fmap
    v = fmap.values
    if mode is Normalization.LOG_PER_SAMPLE_MAX:
        v = np.log1p(v)
    peak = v.max()
    if peak == 0:
        return FeatureMap(v, fmap.kind, fmap.antenna)
    return FeatureMap(v / peak, fmap.kind, fmap.antenna)


def concat_channels(maps: list[FeatureMap]) -> FeatureMap:
    """Stack maps side by side along channels (single-reservoir input)."""
    steps = {m.steps for m in maps}
    if len(steps) != 1:
        raise ShapeError(f"cannot concatenate maps with step counts {sorted(steps)}")
    kind = maps[0].kind if len({m.kind for m in maps}) == 1 else MapKind.MDM
    return FeatureMap(np.concatenate([m.values for m in maps], axis=1), kind)
