"""Portable on-disk dataset format.

A dataset is a directory holding ``manifest.json`` and one binary payload
file per sample. Payload layout (all little-endian)::

    offset  size  field
    0       8     magic  b"ESNGPAYL"
    8       2     format version (uint16, currently 1)
    10      2     dtype code (uint16): 0 = float32, 1 = complex64 (re, im pairs)
    12      4     ndim (uint32)
    16      4*nd  dims (uint32 each)
    ...           row-major values

RDM payloads are ``(T, A, R, D)``; MDM payloads are ``(T, bins)``. Complex
payloads are magnitude-reduced on load and everything is promoted to float64.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .features import FeatureMap, MapKind, RdmSequence, extract_all

__all__ = [
    "PAYLOAD_MAGIC",
    "SampleRecord",
    "DatasetManifest",
    "write_payload",
    "read_payload",
    "save",
    "load",
    "load_manifest",
    "atomic_write",
]

PAYLOAD_MAGIC = b"ESNGPAYL"
PAYLOAD_VERSION = 1
MANIFEST_FORMAT = "esngesture-dataset"
MANIFEST_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<c8")}


@dataclass
class SampleRecord:
    id: str
    label: str
    subject: str
    session: str
    payload: RdmSequence | list[FeatureMap]

    @property
    def steps(self) -> int:
        if isinstance(self.payload, RdmSequence):
            return self.payload.steps
        return self.payload[0].steps


@dataclass
class DatasetManifest:
    name: str
    payload_kind: str  # "rdm" or "mdm"
    dims: list[int]  # [A, R, D] for rdm, [bins] for mdm
    classes: list[str]
    samples: list[dict]

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "name": self.name,
            "payload_kind": self.payload_kind,
            "dims": list(self.dims),
            "classes": list(self.classes),
            "samples": self.samples,
        }


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_payload(array: np.ndarray) -> bytes:
    a = np.asarray(array)
    code = 1 if np.iscomplexobj(a) else 0
    body = np.ascontiguousarray(a, dtype=_DTYPES[code]).tobytes()
    header = PAYLOAD_MAGIC + struct.pack("<HHI", PAYLOAD_VERSION, code, a.ndim)
    return header + struct.pack(f"<{a.ndim}I", *a.shape) + body


def decode_payload(buf: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(buf) < 16 or buf[:8] != PAYLOAD_MAGIC:
        raise DatasetError(f"{source}: not a payload file (bad magic)")
    version, code, ndim = struct.unpack_from("<HHI", buf, 8)
    if version != PAYLOAD_VERSION:
        raise DatasetError(f"{source}: unsupported payload version {version}")
    if code not in _DTYPES:
        raise DatasetError(f"{source}: unknown dtype code {code}")
    if len(buf) < 16 + 4 * ndim:
        raise DatasetError(f"{source}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", buf, 16)
    dtype = _DTYPES[code]
    start = 16 + 4 * ndim
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - start != expected:
        raise DatasetError(
            f"{source}: payload holds {len(buf) - start} bytes, dims {dims} need {expected}"
        )
    return np.frombuffer(buf, dtype=dtype, offset=start).reshape(dims)


def write_payload(path, array: np.ndarray) -> None:
    atomic_write(path, encode_payload(array))


def read_payload(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError:
        raise DatasetError(f"payload file not found: {path}") from None
    return decode_payload(buf, str(path))


def _payload_array(record: SampleRecord) -> np.ndarray:
    if isinstance(record.payload, RdmSequence):
        return record.payload.frames
    if len(record.payload) != 1:
        raise DatasetError(f"sample {record.id}: MDM payloads hold exactly one map")
    return record.payload[0].values


def save(records, directory, name: str = "dataset",
         classes: list[str] | None = None) -> Path:
    """Write ``records`` (any iterable) as a dataset directory; returns the manifest path.

    Records are written one at a time, so a generator keeps memory flat.
    ``classes`` defaults to the sorted set of labels seen.
    """
    directory = Path(directory)
    kind = dims = None
    samples, labels = [], set()
    for r in records:
        if kind is None:
            if isinstance(r.payload, RdmSequence):
                kind, dims = "rdm", list(r.payload.dims[1:])
            else:
                kind, dims = "mdm", [r.payload[0].channels]
        rel = f"data/{r.id}.bin"
        write_payload(directory / rel, _payload_array(r))
        samples.append({"id": r.id, "label": r.label, "subject": r.subject,
                        "session": r.session, "path": rel})
        labels.add(r.label)
    if kind is None:
        raise DatasetError("refusing to save an empty dataset")
    if classes is None:
        classes = sorted(labels)
    manifest = DatasetManifest(name, kind, dims, list(classes), samples)
    path = directory / "manifest.json"
    atomic_write(path, (json.dumps(manifest.to_dict(), indent=1) + "\n").encode())
    return path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise DatasetError(f"manifest not found: {path}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(d, dict) or d.get("format") != MANIFEST_FORMAT:
        raise DatasetError(f"{path}: not an {MANIFEST_FORMAT} manifest")
    if d.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"{path}: unsupported manifest version {d.get('version')!r}")
    for key, typ in (("name", str), ("payload_kind", str), ("dims", list),
                     ("classes", list), ("samples", list)):
        if not isinstance(d.get(key), typ):
            raise DatasetError(f"{path}: field '{key}' missing or not a {typ.__name__}")
    if d["payload_kind"] not in ("rdm", "mdm"):
        raise DatasetError(f"{path}: payload_kind must be 'rdm' or 'mdm', got {d['payload_kind']!r}")
    want = 3 if d["payload_kind"] == "rdm" else 1
    if len(d["dims"]) != want or not all(isinstance(v, int) and v > 0 for v in d["dims"]):
        raise DatasetError(f"{path}: dims must be {want} positive integers, got {d['dims']!r}")
    if not d["classes"] or len(set(d["classes"])) != len(d["classes"]):
        raise DatasetError(f"{path}: class list must be nonempty and unique")
    return DatasetManifest(d["name"], d["payload_kind"], d["dims"], d["classes"], d["samples"])


def load(path, power: bool = False, as_maps: bool = False) -> list[SampleRecord]:
    """Load and validate every sample referenced by a manifest.

    ``path`` is the manifest file or its directory. ``power=True`` squares
    magnitudes of complex payloads instead of taking plain magnitudes.
    ``as_maps=True`` replaces RDM payloads by their extracted feature maps
    right after reading, so that large corpora fit in memory.
    """
    path = Path(path)
    mpath = path / "manifest.json" if path.is_dir() else path
    m = load_manifest(mpath)
    root = mpath.parent
    classes = set(m.classes)
    seen = set()
    records = []
    for n, s in enumerate(m.samples):
        if not isinstance(s, dict):
            raise DatasetError(f"{mpath}: sample entry {n} is not an object")
        sid = s.get("id")
        if not isinstance(sid, str) or not sid:
            raise DatasetError(f"{mpath}: sample entry {n} has no id")
        if sid in seen:
            raise DatasetError(f"sample {sid}: duplicate id")
        seen.add(sid)
        for key in ("label", "subject", "session", "path"):
            if not isinstance(s.get(key), str) or not s[key]:
                raise DatasetError(f"sample {sid}: field '{key}' missing or empty")
        if s["label"] not in classes:
            raise DatasetError(f"sample {sid}: unknown label {s['label']!r}")
        file = root / s["path"]
        if not file.is_file():
            raise DatasetError(f"sample {sid}: payload file not found: {file}")
        payload = _to_payload(read_payload(file), m, sid, power)
        if as_maps and isinstance(payload, RdmSequence):
            payload = extract_all(payload)
        records.append(SampleRecord(sid, s["label"], s["subject"], s["session"], payload))
    return records


def _to_payload(raw: np.ndarray, m: DatasetManifest, sid: str, power: bool):
    if m.payload_kind == "rdm":
        if raw.ndim != 4 or list(raw.shape[1:]) != list(m.dims):
            raise DatasetError(
                f"sample {sid}: payload shape {raw.shape} does not match (T, {', '.join(map(str, m.dims))})"
            )
        if raw.shape[0] < 1:
            raise DatasetError(f"sample {sid}: payload has no frames")
        try:
            return RdmSequence.from_array(raw, power=power)
        except ValueError as exc:
            raise DatasetError(f"sample {sid}: {exc}") from None
    if raw.ndim != 2 or raw.shape[1] != m.dims[0] or raw.shape[0] < 1:
        raise DatasetError(f"sample {sid}: payload shape {raw.shape} does not match (T, {m.dims[0]})")
    values = np.abs(raw) if (np.iscomplexobj(raw) or power) else raw
    if power:
        values = values * values
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DatasetError(f"sample {sid}: payload contains NaN or Inf")
    return [FeatureMap(values, MapKind.MDM)]
