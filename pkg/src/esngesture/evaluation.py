"""Evaluation protocols, confusion matrices and timing.

Four split protocols are supported:

``holdout_50_50``
    Stratified by class. For odd class counts the extra sample goes to the
    training side.
``kfold_10``
    Stratified k-fold (``folds`` defaults to 10); per-class counts across
    folds differ by at most one and the test sets partition the data.
``leave_one_subject_out``
    One fold per subject.
``leave_one_session_out``
    Within each subject, the sorted session list is cut into two halves;
    each half is used once as the test set while the other half trains.
    Training data never leaves the subject, so a subject contributes two
    folds and the report averages them uniformly.

Fold accuracy spread is the population standard deviation.
"""
from __future__ import annotations

import json
import re
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .datasets import SampleRecord
from .errors import EvaluationError, ProtocolError
from .pipeline import build_encoder, fit_readout, sample_maps

__all__ = ["Fold", "SplitPlan", "FoldResult", "EvalReport", "plan_split", "confusion",
           "confusion_percent", "run_eval", "time_pipeline"]


@dataclass(frozen=True)
class Fold:
    key: str
    train: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class SplitPlan:
    protocol: str
    folds: tuple[Fold, ...]
    seed: int


def _natural(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def _by_class(records, rng):
    groups = {}
    for r in sorted(records, key=lambda r: r.id):
        groups.setdefault(r.label, []).append(r.id)
    return {lab: [ids[i] for i in rng.permutation(len(ids))] for lab, ids in sorted(groups.items())}


def plan_split(records: list[SampleRecord], protocol: str, seed: int = 0, folds: int = 10) -> SplitPlan:
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ProtocolError("record ids are not unique")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    out = []
    if protocol == "holdout_50_50":
        train, test = [], []
        for members in _by_class(records, rng).values():
            cut = (len(members) + 1) // 2
            train += members[:cut]
            test += members[cut:]
        out.append(Fold("holdout", tuple(train), tuple(test)))
    elif protocol in ("kfold_10", "kfold"):
        if folds < 2:
            raise ProtocolError(f"k-fold needs at least 2 folds, got {folds}")
        if len(records) < folds:
            raise ProtocolError(f"{len(records)} samples cannot fill {folds} folds")
        buckets = [[] for _ in range(folds)]
        start = 0
        for members in _by_class(records, rng).values():
            for i, sid in enumerate(members):
                buckets[(start + i) % folds].append(sid)
            start = (start + len(members)) % folds
        for k, test in enumerate(buckets):
            held = set(test)
            out.append(Fold(f"fold{k}", tuple(s for s in ids if s not in held), tuple(test)))
    elif protocol == "leave_one_subject_out":
        subjects = sorted({r.subject for r in records}, key=_natural)
        if len(subjects) < 2:
            raise ProtocolError("leave-one-subject-out needs at least two subjects")
        for s in subjects:
            test = tuple(r.id for r in records if r.subject == s)
            train = tuple(r.id for r in records if r.subject != s)
            out.append(Fold(s, train, test))
    elif protocol == "leave_one_session_out":
        subjects = sorted({r.subject for r in records}, key=_natural)
        for s in subjects:
            mine = [r for r in records if r.subject == s]
            sessions = sorted({r.session for r in mine}, key=_natural)
            if len(sessions) < 2:
                raise ProtocolError(f"subject {s} has {len(sessions)} session(s); session-out needs >= 2")
            cut = (len(sessions) + 1) // 2
            halves = {"A": set(sessions[:cut]), "B": set(sessions[cut:])}
            for name, held in halves.items():
                test = tuple(r.id for r in mine if r.session in held)
                train = tuple(r.id for r in mine if r.session not in held)
                out.append(Fold(f"{s}/{name}", train, test))
    else:
        raise ProtocolError(f"unknown protocol {protocol!r}")
    return SplitPlan(protocol, tuple(out), int(seed))


def confusion(true, pred, classes) -> np.ndarray:
    """Counts with rows = true class and columns = predicted class."""
    true, pred = list(true), list(pred)
    if len(true) != len(pred):
        raise ValueError(f"{len(true)} true labels but {len(pred)} predictions")
    pos = {c: i for i, c in enumerate(classes)}
    m = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true, pred):
        if t not in pos or p not in pos:
            raise ValueError(f"label {t if t not in pos else p!r} is not in the class list")
        m[pos[t], pos[p]] += 1
    return m


def confusion_percent(m: np.ndarray) -> np.ndarray:
    """Row-normalized confusion matrix in percent (empty rows stay zero)."""
    rows = m.sum(axis=1, keepdims=True)
    return np.divide(100.0 * m, rows, out=np.zeros(m.shape), where=rows > 0)


@dataclass
class FoldResult:
    key: str
    n_train: int
    n_test: int
    correct: int
    train_seconds: float
    infer_ms_per_sample: float

    @property
    def accuracy(self) -> float:
        return self.correct / self.n_test if self.n_test else float("nan")


@dataclass
class EvalReport:
    protocol: str
    pipeline: str
    classes: list[str]
    folds: list[FoldResult]
    confusion: np.ndarray = field(repr=False)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(statistics.pstdev(self.fold_accuracies)) if len(self.folds) > 1 else 0.0

    @property
    def pooled_accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "protocol": self.protocol,
            "pipeline": self.pipeline,
            "classes": list(self.classes),
            "folds": [
                {"key": f.key, "n_train": f.n_train, "n_test": f.n_test,
                 "correct": f.correct, "accuracy": f.accuracy}
                for f in self.folds
            ],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "std_estimator": "population",
            "pooled_accuracy": self.pooled_accuracy,
            "confusion": self.confusion.tolist(),
            "confusion_percent": np.round(confusion_percent(self.confusion), 6).tolist(),
        }
        if timings:
            d["timings"] = self.timings()
        return d

    def timings(self) -> dict:
        return {
            "folds": [{"key": f.key, "train_seconds": f.train_seconds,
                       "infer_ms_per_sample": f.infer_ms_per_sample} for f in self.folds],
            "median_train_seconds": float(np.median([f.train_seconds for f in self.folds])),
            "median_infer_ms_per_sample": float(np.median([f.infer_ms_per_sample for f in self.folds])),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def confusion_csv(self) -> str:
        lines = ["true\\pred," + ",".join(self.classes)]
        for c, row in zip(self.classes, self.confusion):
            lines.append(c + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def run_eval(records: list[SampleRecord], cfg: PipelineConfig, plan: SplitPlan,
             classes=None, readout=None, threads: int = 1) -> EvalReport:
    """Train and test the pipeline on every fold of ``plan``.

    Reservoirs are rebuilt for each fold from the base seed (or from
    ``seed + fold`` with ``cfg.reseed_per_fold``). Because a rebuild from the
    same seed is bit-identical, the states of each sample are computed once
    per distinct seed and shared across folds. Fold timings are assembled
    from the measured per-sample encoding times plus readout fit/predict time.

    ``readout`` optionally replaces the configured readout: a callable
    ``(train_states, train_labels, n_classes) -> model`` where ``model`` has a
    ``predict(states)`` method returning class indices.
    """
    by_id = {r.id: r for r in records}
    if classes is None:
        classes = sorted({r.label for r in records})
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    labels = {r.id: index[r.label] for r in records}
    position = {r.id: i for i, r in enumerate(records)}
    example = sample_maps(records[0], cfg.normalization)
    cache = {}

    def encoded(offset):
        if offset not in cache:
            t0 = time.perf_counter()
            enc = build_encoder(cfg, example, offset)
            build_s = time.perf_counter() - t0
            per_sample = []
            states = enc.encode_many(records, threads, per_sample)
            cache[offset] = (states, np.asarray(per_sample), build_s)
        return cache[offset]

    results = []
    pooled = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for k, fold in enumerate(plan.folds):
        try:
            for sid in fold.train + fold.test:
                if sid not in by_id:
                    raise EvaluationError(f"plan references unknown sample id {sid!r}")
            states, sample_s, build_s = encoded(k if cfg.reseed_per_fold else 0)
            tr = np.array([position[s] for s in fold.train], dtype=np.int64)
            te = np.array([position[s] for s in fold.test], dtype=np.int64)
            ytr = np.array([labels[s] for s in fold.train], dtype=np.int64)
            yte = np.array([labels[s] for s in fold.test], dtype=np.int64)
            t0 = time.perf_counter()
            if readout is None:
                model = fit_readout(cfg, states[tr], ytr, len(classes))
            else:
                model = readout(states[tr], ytr, len(classes))
            fit_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            pred = np.asarray(model.predict(states[te]), dtype=np.int64)
            pred_s = time.perf_counter() - t0
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"fold {k} ({fold.key}) failed: {exc}") from exc
        m = confusion(yte.tolist(), pred.tolist(), list(range(len(classes))))
        pooled += m
        infer_ms = 1e3 * (sample_s[te].sum() + pred_s) / max(len(te), 1)
        results.append(FoldResult(fold.key, len(tr), len(te), int(np.trace(m)),
                                  build_s + float(sample_s[tr].sum()) + fit_s, infer_ms))
    return EvalReport(plan.protocol, cfg.name, classes, results, pooled)


def time_pipeline(records: list[SampleRecord], cfg: PipelineConfig, repetitions: int = 3,
                  seed: int = 0, classes=None) -> tuple[float, float]:
    """Median training seconds and inference ms/sample over a 50:50 holdout.

    Training covers reservoir construction, feature extraction, state
    collection and readout fitting on the training half. Inference covers
    feature extraction, reservoir run and prediction for each test sample.
    Disk I/O is excluded: ``records`` are already in memory.
    """
    from .pipeline import train

    if repetitions < 3:
        raise ValueError("time_pipeline needs at least 3 repetitions")
    plan = plan_split(records, "holdout_50_50", seed)
    by_id = {r.id: r for r in records}
    tr = [by_id[s] for s in plan.folds[0].train]
    te = [by_id[s] for s in plan.folds[0].test]
    if classes is None:
        classes = sorted({r.label for r in records})
    train_s, infer_ms = [], []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        model = train(cfg, tr, classes)
        train_s.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        for r in te:
            model.readout.predict(model.encoder.encode(r)[None, :])
        infer_ms.append(1e3 * (time.perf_counter() - t0) / max(len(te), 1))
    return float(np.median(train_s)), float(np.median(infer_ms))
