"""Synthetic RDM gesture corpus with known ground truth.

Every class follows one trajectory from a fixed catalog: the range centre of
a Gaussian blob moves along the trajectory while its Doppler centre tracks
the negated, discretized range velocity (approaching targets land on the
positive-Doppler half, above bin ``D // 2``). The Doppler spread grows as the
hand gets closer, so static or fluttering gestures at different ranges still
have different Doppler signatures. Subjects shift trajectories in
range, sessions jitter amplitude, and i.i.d. half-normal noise of scale
``noise`` is added to every bin.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .datasets import SampleRecord
from .errors import ParameterError
from .features import MapKind, RdmSequence, compute_dtm, extract_all

__all__ = ["TRAJECTORIES", "SynthSpec", "synth_generate", "synth_iter", "trajectory", "sample_seed",
           "resample_time", "nearest_centroid_accuracy"]


def _lin(a, b):
    return lambda s: a + (b - a) * s


def _piece(a, b, c):
    return lambda s: np.where(s < 0.5, a + (b - a) * 2 * s, b + (c - b) * (2 * s - 1))


def _hold_then(a, b, start):
    return lambda s: np.where(s < start, a, a + (b - a) * (s - start) / (1 - start))


def _then_hold(a, b, stop):
    return lambda s: np.where(s < stop, a + (b - a) * s / stop, b)


def _osc(centre, amp, cycles):
    return lambda s: centre + amp * np.sin(2 * np.pi * cycles * s)


# Range centre as a function of normalized time s in [0, 1], in units of the
# range axis (0 = nearest bin, 1 = farthest).
TRAJECTORIES = {
    "approach": _lin(0.75, 0.25),
    "recede": _lin(0.25, 0.75),
    "oscillate": _osc(0.5, 0.18, 2.0),
    "static_near": lambda s: 0.2 + 0.0 * s,
    "static_far": lambda s: 0.8 + 0.0 * s,
    "fast_sweep": _piece(0.75, 0.2, 0.75),
    "sweep_out_back": _piece(0.25, 0.8, 0.25),
    "slow_oscillate": _osc(0.5, 0.2, 1.0),
    "approach_hold": _then_hold(0.75, 0.3, 0.5),
    "hold_recede": _hold_then(0.3, 0.75, 0.5),
    "flutter_near": _osc(0.25, 0.06, 4.0),
    "flutter_far": _osc(0.75, 0.06, 4.0),
}
CATALOG = tuple(TRAJECTORIES)


def trajectory(name_or_index, s) -> np.ndarray:
    key = CATALOG[name_or_index] if isinstance(name_or_index, int) else name_or_index
    return np.asarray(TRAJECTORIES[key](np.asarray(s, dtype=np.float64)), dtype=np.float64)


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 11
    samples_per_class: int = 250
    subjects: int = 10
    sessions: int = 5
    min_steps: int = 28
    max_steps: int = 145
    noise: float = 0.0
    seed: int = 0
    antennas: int = 4
    range_bins: int = 32
    doppler_bins: int = 32
    blob_width: float = 1.5
    doppler_gain: float = 8.0
    near_spread: float = 1.0  # Doppler width is blob_width * (1 + near_spread * (1 - range))
    subject_shift: float = 0.02  # max |range offset| per subject, fraction of range axis
    session_jitter: float = 0.2  # max relative amplitude change per session

    def __post_init__(self):
        for name in ("classes", "samples_per_class", "subjects", "sessions",
                     "min_steps", "antennas", "range_bins", "doppler_bins"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"SynthSpec.{name} must be positive")
        if self.classes > len(CATALOG):
            raise ParameterError(
                f"{self.classes} classes requested but the trajectory catalog has {len(CATALOG)}"
            )
        if self.min_steps > self.max_steps:
            raise ParameterError("min_steps must not exceed max_steps")
        if self.noise < 0:
            raise ParameterError("noise level must be >= 0")

    @property
    def class_names(self) -> list[str]:
        return list(CATALOG[: self.classes])


def sample_seed(base_seed: int, sample_id: str) -> int:
    """Per-sample seed derived from the base seed and the sample id."""
    h = hashlib.sha256(f"{int(base_seed)}:{sample_id}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def _unit(seed: int, *key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *key])))


def synth_generate(spec: SynthSpec, as_maps: bool = False) -> list[SampleRecord]:
    """Generate ``classes * samples_per_class`` RDM samples.

    Sample ``k`` of a class belongs to subject ``k % subjects`` and, within
    that subject, to session ``(k // subjects) % sessions``.

    With ``as_maps=True`` each payload is replaced by its extracted
    ``[RTM_0, DTM_0, ...]`` list as soon as it is generated, which keeps
    Soli-sized corpora in memory at a fraction of the RDM footprint.
    """
    return list(synth_iter(spec, as_maps))


def synth_iter(spec: SynthSpec, as_maps: bool = False):
    """Generator form of :func:`synth_generate`."""
    r_bins, d_bins = spec.range_bins, spec.doppler_bins
    subj_rng = _unit(spec.seed, 1)
    shifts = subj_rng.uniform(-spec.subject_shift, spec.subject_shift, spec.subjects)
    sess_rng = _unit(spec.seed, 2)
    gains = 1.0 + sess_rng.uniform(-spec.session_jitter, spec.session_jitter,
                                   (spec.subjects, spec.sessions))
    ant_gain = 1.0 + 0.1 * np.linspace(-1, 1, spec.antennas) if spec.antennas > 1 else np.ones(1)
    rr = np.arange(r_bins, dtype=np.float64)[:, None]
    dd = np.arange(d_bins, dtype=np.float64)[None, :]
    width2 = 2.0 * spec.blob_width ** 2
    centre = d_bins // 2
    for c, name in enumerate(spec.class_names):
        for k in range(spec.samples_per_class):
            subject = k % spec.subjects
            session = (k // spec.subjects) % spec.sessions
            sid = f"c{c:02d}_s{subject:02d}_n{k:04d}"
            rng = np.random.Generator(np.random.PCG64(sample_seed(spec.seed, sid)))
            steps = int(rng.integers(spec.min_steps, spec.max_steps + 1))
            s = (np.arange(steps) + 0.5) / steps
            rc = (trajectory(name, s) + shifts[subject]) * (r_bins - 1)
            vel = np.gradient(rc) if steps > 1 else np.zeros(1)
            dc = np.clip(centre - spec.doppler_gain * vel, 1.0, d_bins - 2.0)
            # the Gaussian is separable: (T, R) range profile x (T, D) Doppler profile
            g_r = np.exp(-(rr[:, 0][None] - rc[:, None]) ** 2 / width2)
            near = 1.0 - np.clip(rc / (r_bins - 1), 0.0, 1.0)
            width2_d = 2.0 * (spec.blob_width * (1.0 + spec.near_spread * near)) ** 2
            g_d = np.exp(-(dd[0][None] - dc[:, None]) ** 2 / width2_d[:, None])
            blob = g_r[:, :, None] * g_d[:, None, :]
            amp = gains[subject, session]
            frames = (amp * blob[:, None] * ant_gain[None, :, None, None]).astype(np.float32)
            if spec.noise > 0:
                noise = rng.standard_normal(frames.shape, dtype=np.float32)
                np.abs(noise, out=noise)
                noise *= np.float32(spec.noise)
                frames += noise
            # float32 values, as stored on disk, promoted for computation
            seq = RdmSequence(frames.astype(np.float64))
            yield SampleRecord(sid, name, f"S{subject + 1:02d}",
                               f"S{subject + 1:02d}-{session + 1}",
                               extract_all(seq) if as_maps else seq)


def resample_time(values: np.ndarray, steps: int = 32) -> np.ndarray:
    """Linearly resample a ``(T, C)`` map to ``steps`` rows."""
    t = values.shape[0]
    if t == 1:
        return np.repeat(values, steps, axis=0)
    src = np.linspace(0.0, 1.0, t)
    dst = np.linspace(0.0, 1.0, steps)
    return np.stack([np.interp(dst, src, values[:, j]) for j in range(values.shape[1])], axis=1)


def _centroid_features(records, steps: int) -> np.ndarray:
    rows = []
    for r in records:
        if isinstance(r.payload, RdmSequence):
            dtm = compute_dtm(r.payload, 0)
        else:
            dtm = next(m for m in r.payload if m.kind is MapKind.DTM)
        v = resample_time(dtm.values, steps)
        peak = v.max()
        rows.append((v / peak if peak > 0 else v).ravel())
    return np.array(rows)


def nearest_centroid_accuracy(train, test, steps: int = 32) -> float:
    """Accuracy of a nearest-centroid classifier on time-resampled antenna-0 DTMs.

    A learnability baseline for synthetic corpora: it has no memory and no
    invariance to timing, so it bounds how much of a task is solvable by
    template matching alone.
    """
    classes = sorted({r.label for r in train})
    xtr = _centroid_features(train, steps)
    ytr = np.array([classes.index(r.label) for r in train])
    cents = np.stack([xtr[ytr == k].mean(0) for k in range(len(classes))])
    xte = _centroid_features(test, steps)
    d = ((xte[:, None, :] - cents[None]) ** 2).sum(-1)
    pred = np.argmin(d, axis=1)
    truth = np.array([classes.index(r.label) for r in test])
    return float(np.mean(pred == truth))
