"""Random and grid search over reservoir and readout hyperparameters.

Each trial is scored by mean stratified 3-fold accuracy on the records it is
given; callers pass training data only so test folds never leak into tuning.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .errors import ParameterError
from .evaluation import plan_split, run_eval

__all__ = ["Interval", "SearchSpace", "Trial", "SearchResult", "default_space",
           "random_search", "grid_search", "evaluate_trial", "apply_params"]

TUNED = ("nodes", "spectral_radius", "input_scaling", "density", "leaking_rate", "ridge_lambda")
_LIMITS = {
    "spectral_radius": (0.0, math.inf),
    "input_scaling": (0.0, math.inf),
    "density": (0.0, 1.0),
    "leaking_rate": (0.0, 1.0),
    "ridge_lambda": (0.0, math.inf),
}


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if self.low > self.high:
            raise ParameterError(f"empty interval [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise ParameterError("log-uniform intervals need a positive lower bound")

    def sample(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            return float(self.low)
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class SearchSpace:
    nodes: tuple[int, ...]
    spectral_radius: Interval
    input_scaling: Interval
    density: Interval
    leaking_rate: Interval
    ridge_lambda: Interval

    def __post_init__(self):
        if not self.nodes or any(int(n) < 1 for n in self.nodes):
            raise ParameterError("nodes must be a nonempty set of positive integers")
        for name, (lo, hi) in _LIMITS.items():
            iv = getattr(self, name)
            if iv.low <= lo or iv.high > hi:
                raise ParameterError(f"{name} interval [{iv.low}, {iv.high}] leaves ({lo}, {hi}]")

    def sample(self, rng: np.random.Generator) -> dict:
        return {
            "nodes": int(self.nodes[int(rng.integers(len(self.nodes)))]),
            "spectral_radius": self.spectral_radius.sample(rng),
            "input_scaling": self.input_scaling.sample(rng),
            "density": self.density.sample(rng),
            "leaking_rate": self.leaking_rate.sample(rng),
            "ridge_lambda": self.ridge_lambda.sample(rng),
        }


def default_space(cfg: PipelineConfig) -> SearchSpace:
    """Bracket the configured values by a factor of 4 each way, clipped to validity."""
    r = cfg.reservoir
    return SearchSpace(
        nodes=tuple(sorted({max(1, r.nodes // 4), max(1, r.nodes // 2), r.nodes, 2 * r.nodes, 4 * r.nodes})),
        spectral_radius=Interval(r.spectral_radius / 4, r.spectral_radius * 4),
        input_scaling=Interval(r.input_scaling / 4, r.input_scaling * 4),
        density=Interval(min(r.density / 4, 1.0), min(r.density * 4, 1.0)),
        leaking_rate=Interval(r.leaking_rate / 4, min(r.leaking_rate * 4, 1.0), log=True),
        ridge_lambda=Interval(cfg.ridge_lambda / 4, cfg.ridge_lambda * 4, log=True),
    )


@dataclass
class Trial:
    index: int
    params: dict
    objective: float
    seconds: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {"index": self.index, "params": self.params, "objective": self.objective,
                "seconds": self.seconds, "error": self.error}


@dataclass
class SearchResult:
    best: Trial
    trials: list[Trial] = field(default_factory=list)

    def to_dict(self, timings: bool = True) -> dict:
        rows = [t.to_dict() for t in self.trials]
        if not timings:
            for row in rows:
                row.pop("seconds")
        return {"best": self.best.index, "trials": rows}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def apply_params(cfg: PipelineConfig, params: dict) -> PipelineConfig:
    res = {k: v for k, v in params.items() if k != "ridge_lambda"}
    out = cfg.with_(reservoir=cfg.reservoir.with_(**res))
    if "ridge_lambda" in params:
        out = out.with_(ridge_lambda=float(params["ridge_lambda"]))
    return out


def evaluate_trial(records, cfg: PipelineConfig, params: dict, seed: int = 0,
                   folds: int = 3, classes=None) -> float:
    plan = plan_split(records, "kfold", seed, folds=folds)
    return run_eval(records, apply_params(cfg, params), plan, classes).mean_accuracy


def _run(index, records, cfg, params, seed, folds, classes) -> Trial:
    t0 = time.perf_counter()
    try:
        obj = evaluate_trial(records, cfg, params, seed, folds, classes)
        err = None
    except Exception as exc:  # a failed trial is logged, not fatal
        obj, err = 0.0, f"{type(exc).__name__}: {exc}"
    return Trial(index, params, float(obj), time.perf_counter() - t0, err)


def _best(trials: list[Trial]) -> Trial:
    # max() keeps the first maximum, i.e. the lowest trial index on ties
    return max(trials, key=lambda t: t.objective)


def random_search(space: SearchSpace, budget: int, records, cfg: PipelineConfig,
                  seed: int = 0, folds: int = 3, classes=None, log=None) -> SearchResult:
    if budget < 1:
        raise ParameterError("search budget must be >= 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    trials = []
    for i in range(budget):
        trials.append(_run(i, records, cfg, space.sample(rng), seed, folds, classes))
        if log is not None:
            log(trials[-1])
    return SearchResult(_best(trials), trials)


def grid_search(grid: dict, records, cfg: PipelineConfig, seed: int = 0, folds: int = 3,
                classes=None, log=None) -> SearchResult:
    """Exhaustive search; trials run in lexicographic order of ``grid`` keys and values."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ParameterError("grid must be nonempty along every axis")
    unknown = set(grid) - set(TUNED)
    if unknown:
        raise ParameterError(f"unknown grid parameters {sorted(unknown)}")
    keys = list(grid)
    trials = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        params = {k: (int(v) if k == "nodes" else float(v)) for k, v in zip(keys, combo)}
        trials.append(_run(i, records, cfg, params, seed, folds, classes))
        if log is not None:
            log(trials[-1])
    return SearchResult(_best(trials), trials)
