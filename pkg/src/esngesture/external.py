"""Best-effort converters for the public Soli and Dop-NET releases.

Nothing else in the package imports this module; the datasets themselves are
not bundled.

Soli (deep-soli HDF5 release)
    One ``<gesture>_<session>_<instance>.h5`` file per sample with datasets
    ``ch0`` .. ``ch3`` of shape ``(T, 1024)``, each row a flattened 32x32
    RDM. The file name carries no subject id, so the subject defaults to the
    session id; pass ``subject_map`` (session id -> subject id) to group
    sessions by person.

Dop-NET
    Either per-person MATLAB files ``*Person_<X>*.mat`` holding a ``Data``
    cell array indexed ``[gesture][sample]`` of complex ``(800, T)``
    spectrograms, or a directory of ``<person>_<gesture>_<index>.npy``
    arrays shaped ``(T, 800)``. Dop-NET ships no session ids; every sample is
    assigned session ``1``.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from pathlib import Path

import numpy as np

from .datasets import SampleRecord, save
from .errors import DatasetError
from .features import FeatureMap, MapKind, RdmSequence

log = logging.getLogger(__name__)

__all__ = ["SOLI_CLASSES", "DOPNET_CLASSES", "convert_external", "read_soli", "read_dopnet"]

SOLI_CLASSES = ["pinch_index", "palm_tilt", "finger_slider", "pinch_pinky", "slow_swipe",
                "fast_swipe", "push", "pull", "finger_rub", "circle", "palm_hold"]
DOPNET_CLASSES = ["wave", "pinch", "swipe", "click"]
SOLI_EXPECTED = {"total": 2750, "per_class": 250, "subjects": 10}
DOPNET_EXPECTED = {
    "total": 2433,
    "per_class": {"swipe": 479, "click": 792, "pinch": 696, "wave": 466},
    "subjects": 6,
}

_SOLI_NAME = re.compile(r"^(\d+)_(\d+)_(\d+)\.h5$")
_NPY_NAME = re.compile(r"^([A-Za-z0-9]+)_([A-Za-z]+)_(\d+)\.npy$")


def read_soli(source, subject_map: dict | None = None) -> list[SampleRecord]:
    try:
        import h5py
    except ImportError as exc:  # optional dependency
        raise DatasetError("Soli conversion needs h5py (pip install h5py)") from exc
    files = sorted(p for p in Path(source).iterdir() if _SOLI_NAME.match(p.name))
    if not files:
        raise DatasetError(f"{source}: no <gesture>_<session>_<instance>.h5 files found")
    records = []
    for p in files:
        g, sess, inst = (int(v) for v in _SOLI_NAME.match(p.name).groups())
        if g >= len(SOLI_CLASSES):
            raise DatasetError(f"{p}: gesture id {g} outside 0..{len(SOLI_CLASSES) - 1}")
        try:
            with h5py.File(p, "r") as fh:
                chans = [np.asarray(fh[f"ch{a}"]) for a in range(4)]
        except (OSError, KeyError) as exc:
            raise DatasetError(f"{p}: unreadable Soli file: {exc}") from None
        steps = chans[0].shape[0]
        frames = np.stack([c.reshape(steps, 32, 32) for c in chans], axis=1)
        subject = (subject_map or {}).get(str(sess), str(sess))
        records.append(SampleRecord(f"soli_{g}_{sess}_{inst}", SOLI_CLASSES[g], f"S{subject}",
                                    str(sess), RdmSequence.from_array(frames)))
    return records


def read_dopnet(source) -> list[SampleRecord]:
    source = Path(source)
    npys = sorted(p for p in source.iterdir() if _NPY_NAME.match(p.name))
    mats = sorted(p for p in source.iterdir() if p.suffix == ".mat" and "Person_" in p.name)
    records = []
    for p in npys:
        person, gesture, idx = _NPY_NAME.match(p.name).groups()
        gesture = gesture.lower()
        if gesture not in DOPNET_CLASSES:
            raise DatasetError(f"{p}: unknown Dop-NET gesture {gesture!r}")
        records.append(_mdm_record(f"dopnet_{person}_{gesture}_{idx}", gesture, person, np.load(p)))
    for p in mats:
        person = p.stem.split("Person_")[-1][:1]
        for g, gesture in enumerate(DOPNET_CLASSES):
            for k, arr in enumerate(_mat_cells(p, g)):
                records.append(_mdm_record(f"dopnet_{person}_{gesture}_{k}", gesture, person, arr))
    if not records:
        raise DatasetError(f"{source}: no Dop-NET .mat or <person>_<gesture>_<index>.npy files found")
    return records


def _mdm_record(sid, gesture, person, arr) -> SampleRecord:
    a = np.abs(np.asarray(arr))
    if a.ndim != 2 or 800 not in a.shape:
        raise DatasetError(f"sample {sid}: expected an 800-bin spectrogram, got {a.shape}")
    if a.shape[1] != 800:
        a = a.T
    return SampleRecord(sid, gesture, person, "1", [FeatureMap(a.astype(np.float64), MapKind.MDM)])


def _mat_cells(path: Path, gesture: int):
    from scipy.io import loadmat

    try:
        data = loadmat(path)["Data"]
        row = data[gesture, 0] if data.shape[0] > gesture else data[0, gesture]
        return [np.asarray(v) for v in row.ravel()]
    except NotImplementedError:  # MATLAB v7.3 files are HDF5
        import h5py

        with h5py.File(path, "r") as fh:
            refs = fh["Data"][gesture]
            out = []
            for ref in np.ravel(refs):
                v = fh[ref][()]
                if v.dtype.names and "real" in v.dtype.names:
                    v = v["real"] + 1j * v["imag"]
                out.append(np.asarray(v).T)
            return out
    except (KeyError, ValueError, OSError) as exc:
        raise DatasetError(f"{path}: unreadable Dop-NET file: {exc}") from None


def _check_counts(records, expected, kind) -> list[str]:
    warnings = []
    if len(records) != expected["total"]:
        warnings.append(f"{kind}: {len(records)} samples, expected {expected['total']}")
    counts = Counter(r.label for r in records)
    per = expected["per_class"]
    for label, n in sorted(counts.items()):
        want = per if isinstance(per, int) else per.get(label)
        if want is not None and n != want:
            warnings.append(f"{kind}: class {label} has {n} samples, expected {want}")
    subjects = len({r.subject for r in records})
    if subjects != expected["subjects"]:
        warnings.append(f"{kind}: {subjects} subjects, expected {expected['subjects']}")
    for w in warnings:
        log.warning(w)
    return warnings


def convert_external(kind: str, source, dest, subject_map: dict | None = None):
    """Convert a raw release into the portable format.

    Returns ``(manifest_path, warnings)``. Count mismatches against the
    published totals are reported as warnings, not errors.
    """
    source = Path(source)
    if not source.is_dir():
        raise DatasetError(f"source directory not found: {source}")
    if kind == "soli":
        records = read_soli(source, subject_map)
        warnings = _check_counts(records, SOLI_EXPECTED, "soli")
        classes = SOLI_CLASSES
    elif kind == "dopnet":
        records = read_dopnet(source)
        warnings = _check_counts(records, DOPNET_EXPECTED, "dopnet")
        classes = DOPNET_CLASSES
    else:
        raise DatasetError(f"unknown dataset kind {kind!r}; use 'soli' or 'dopnet'")
    return save(records, dest, kind, classes), warnings
