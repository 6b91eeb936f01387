"""Bank of independent reservoirs, one per feature map.

Each reservoir sees one map; the final states are concatenated in bank order
into a single unified state vector fed to the readout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reservoir as rsv
from .errors import ParameterError, ShapeError
from .features import FeatureMap

__all__ = ["ReservoirBank", "UnifiedState", "build_bank", "run_bank"]


@dataclass(frozen=True, eq=False)
class ReservoirBank:
    reservoirs: tuple[rsv.Reservoir, ...]
    map_dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.reservoirs) < 1:
            raise ParameterError("a reservoir bank needs at least one reservoir")
        for i, (r, d) in enumerate(zip(self.reservoirs, self.map_dims)):
            if r.input_dim != d:
                raise ShapeError(f"reservoir {i} takes {r.input_dim} channels, map expects {d}")

    @property
    def size(self) -> int:
        return len(self.reservoirs)

    @property
    def state_dim(self) -> int:
        return sum(r.nodes for r in self.reservoirs)

    @property
    def layout(self) -> list[tuple[int, int, int]]:
        """``(reservoir index, offset, length)`` for each block of the state."""
        out, offset = [], 0
        for i, r in enumerate(self.reservoirs):
            out.append((i, offset, r.nodes))
            offset += r.nodes
        return out


@dataclass(frozen=True)
class UnifiedState:
    r: np.ndarray
    layout: list[tuple[int, int, int]]

    def block(self, i: int) -> np.ndarray:
        _, offset, length = self.layout[i]
        return self.r[offset:offset + length]


def build_bank(base_spec: rsv.ReservoirSpec, map_dims) -> ReservoirBank:
    """One reservoir per map; reservoir ``i`` is seeded ``base_spec.seed + i``."""
    map_dims = tuple(int(d) for d in map_dims)
    if not map_dims:
        raise ParameterError("build_bank needs at least one map dimension")
    reservoirs = tuple(
        rsv.build(base_spec.with_(input_dim=d, seed=base_spec.seed + i))
        for i, d in enumerate(map_dims)
    )
    return ReservoirBank(reservoirs, map_dims)


def run_bank(bank: ReservoirBank, maps) -> UnifiedState:
    """Run every map through its reservoir and concatenate the final states."""
    maps = list(maps)
    if len(maps) != bank.size:
        raise ShapeError(f"bank has {bank.size} reservoirs but {len(maps)} maps were given")
    values = []
    for i, (m, d) in enumerate(zip(maps, bank.map_dims)):
        v = m.values if isinstance(m, FeatureMap) else np.asarray(m, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != d:
            raise ShapeError(f"map {i} has shape {v.shape}, reservoir {i} expects {d} channels")
        values.append(v)
    if bank.size > 1 and _uniform(bank) and len({v.shape[0] for v in values}) == 1:
        r = _run_stacked(bank, values)
    else:
        r = np.concatenate([rsv.run(res, v) for res, v in zip(bank.reservoirs, values)])
    return UnifiedState(r, bank.layout)


def _uniform(bank: ReservoirBank) -> bool:
    first = bank.reservoirs[0].spec
    return all(
        r.nodes == first.nodes and r.spec.leaking_rate == first.leaking_rate
        for r in bank.reservoirs
    )


def _run_stacked(bank: ReservoirBank, values) -> np.ndarray:
    # Equal-size reservoirs on equal-length maps advance together through one
    # batched matmul per step; each block still depends only on its own map.
    a = bank.reservoirs[0].spec.leaking_rate
    keep = 1.0 - a
    w_res = _stacked_weights(bank)
    drive = np.stack([v @ r.w_in.T for v, r in zip(values, bank.reservoirs)], axis=1)
    x = np.zeros(w_res.shape[:2] + (1,))
    for t in range(drive.shape[0]):
        x = keep * x + a * np.tanh(drive[t][:, :, None] + np.matmul(w_res, x))
    return x.reshape(-1)


def _stacked_weights(bank: ReservoirBank) -> np.ndarray:
    cached = getattr(bank, "_w_stack", None)
    if cached is None:
        cached = np.stack([r.w_res for r in bank.reservoirs])
        object.__setattr__(bank, "_w_stack", cached)
    return cached
