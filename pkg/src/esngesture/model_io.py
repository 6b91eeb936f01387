"""Trained-model files.

Layout (little-endian), sharing the payload header convention::

    0    8   magic b"ESNGMODL"
    8    2   format version (uint16)
    10   2   reserved (0)
    12   4   descriptor length in bytes (uint32)
    16   n   UTF-8 JSON descriptor: config, classes, map order, readout
             metadata, and an index of arrays (name, dtype, shape, offset)
    ..       concatenated array data (float64 '<f8' / int64 '<i8')
    end-32   SHA-256 of everything before it

The descriptor is written with sorted keys so equal models give equal bytes.
Run-time settings of the config (dataset and output paths, thread count) are
not stored, so the bytes do not depend on where or how a model was trained.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import reservoir as rsv
from .config import PipelineConfig
from .datasets import atomic_write
from .errors import ModelFormatError
from .multi_reservoir import ReservoirBank
from .nonlinear_readouts import BinarySvm, ForestModel, SvmModel, Tree
from .pipeline import Encoder, TrainedModel
from .readout import Expansion, RidgeReadout

__all__ = ["MODEL_MAGIC", "MODEL_VERSION", "dumps_model", "loads_model", "save_model", "load_model"]

MODEL_MAGIC = b"ESNGMODL"
MODEL_VERSION = 1


class _Arrays:
    def __init__(self):
        self.index = []
        self.chunks = []
        self.offset = 0

    def add(self, name: str, a) -> str:
        a = np.asarray(a)
        dt = "<i8" if np.issubdtype(a.dtype, np.integer) else "<f8"
        data = np.ascontiguousarray(a, dtype=dt).tobytes()
        self.index.append({"name": name, "dtype": dt, "shape": list(a.shape), "offset": self.offset})
        self.chunks.append(data)
        self.offset += len(data)
        return name


def dumps_model(model: TrainedModel) -> bytes:
    arrays = _Arrays()
    enc = model.encoder
    reservoirs = []
    for i, r in enumerate(enc.bank.reservoirs):
        reservoirs.append({
            "spec": r.spec.to_dict(),
            "achieved_rho": r.achieved_rho,
            "w_in": arrays.add(f"res{i}.w_in", r.w_in),
            "w_res": arrays.add(f"res{i}.w_res", r.w_res),
        })
    desc = {
        "config": model.config.with_(dataset=None, output=None, threads=None).to_dict(),
        "classes": list(model.classes),
        "architecture": enc.architecture,
        "normalization": enc.normalization,
        "map_order": [list(s) for s in enc.signature],
        "reservoirs": reservoirs,
        "readout": _dump_readout(model.readout, arrays),
        "arrays": arrays.index,
    }
    text = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()
    head = MODEL_MAGIC + struct.pack("<HHI", MODEL_VERSION, 0, len(text))
    body = head + text + b"".join(arrays.chunks)
    return body + hashlib.sha256(body).digest()


def _dump_readout(ro, arrays: _Arrays) -> dict:
    if isinstance(ro, RidgeReadout):
        return {"type": "ridge", "lambda": ro.lam, "expansion": ro.expansion.value,
                "labels": list(ro.labels), "train_residual": ro.train_residual,
                "w_out": arrays.add("ridge.w_out", ro.w_out)}
    if isinstance(ro, SvmModel):
        machines = []
        for p, m in enumerate(ro.machines):
            machines.append({"pos": m.pos, "neg": m.neg, "bias": m.bias,
                             "support": arrays.add(f"svm{p}.support", m.support),
                             "coef": arrays.add(f"svm{p}.coef", m.coef)})
        return {"type": "svm", "gamma": ro.gamma, "c": ro.c, "n_classes": ro.n_classes,
                "vectors": arrays.add("svm.vectors", ro.vectors), "machines": machines}
    if isinstance(ro, ForestModel):
        sizes = [t.node_count for t in ro.trees]
        cat = lambda attr: np.concatenate([getattr(t, attr) for t in ro.trees])
        return {"type": "forest", "n_classes": ro.n_classes, "n_features": ro.n_features,
                "oob_score": ro.oob_score, "sizes": sizes,
                "feature": arrays.add("rf.feature", cat("feature")),
                "threshold": arrays.add("rf.threshold", cat("threshold")),
                "left": arrays.add("rf.left", cat("left")),
                "right": arrays.add("rf.right", cat("right")),
                "counts": arrays.add("rf.counts", np.concatenate([t.counts for t in ro.trees]))}
    raise TypeError(f"cannot serialize readout of type {type(ro).__name__}")


def loads_model(buf: bytes, source: str = "<bytes>") -> TrainedModel:
    if len(buf) < 48 or buf[:8] != MODEL_MAGIC:
        raise ModelFormatError(f"{source}: not a model file (bad magic)")
    version, _, n = struct.unpack_from("<HHI", buf, 8)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{source}: model format version {version}, expected {MODEL_VERSION}")
    body, digest = buf[:-32], buf[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelFormatError(f"{source}: checksum mismatch, file is corrupt")
    try:
        desc = json.loads(body[16:16 + n].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{source}: unreadable descriptor: {exc}") from None
    blob = body[16 + n:]
    arrays = {}
    for e in desc["arrays"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"], dtype=np.int64))
        arrays[e["name"]] = np.frombuffer(blob, dtype=dt, count=count,
                                          offset=e["offset"]).reshape(e["shape"]).copy()
    cfg = PipelineConfig.from_dict(desc["config"])
    reservoirs = tuple(
        rsv.from_weights(rsv.ReservoirSpec.from_dict(r["spec"]), arrays[r["w_in"]],
                         arrays[r["w_res"]], r["achieved_rho"])
        for r in desc["reservoirs"]
    )
    bank = ReservoirBank(reservoirs, tuple(r.input_dim for r in reservoirs))
    signature = tuple((k, int(c)) for k, c in desc["map_order"])
    enc = Encoder(desc["architecture"], bank, signature, desc["normalization"])
    ro = _load_readout(desc["readout"], arrays)
    return TrainedModel(cfg, enc, ro, tuple(desc["classes"]))


def _load_readout(d: dict, arrays: dict):
    kind = d["type"]
    if kind == "ridge":
        return RidgeReadout(arrays[d["w_out"]], d["lambda"], Expansion(d["expansion"]),
                            tuple(d["labels"]), d["train_residual"])
    if kind == "svm":
        machines = tuple(
            BinarySvm(m["pos"], m["neg"], arrays[m["support"]], arrays[m["coef"]], m["bias"], None, None)
            for m in d["machines"]
        )
        return SvmModel(arrays[d["vectors"]], machines, d["gamma"], d["c"], d["n_classes"])
    if kind == "forest":
        trees, start = [], 0
        for size in d["sizes"]:
            sl = slice(start, start + size)
            trees.append(Tree(arrays[d["feature"]][sl], arrays[d["threshold"]][sl],
                              arrays[d["left"]][sl], arrays[d["right"]][sl], arrays[d["counts"]][sl]))
            start += size
        return ForestModel(tuple(trees), d["n_classes"], d["n_features"], d["oob_score"])
    raise ModelFormatError(f"unknown readout type {kind!r}")


def save_model(model: TrainedModel, path) -> None:
    atomic_write(path, dumps_model(model))


def load_model(path) -> TrainedModel:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}") from None
    return loads_model(buf, str(path))
