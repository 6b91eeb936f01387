"""Leaky-integrator echo state reservoir.

State update, with ``x(0) = 0`` and no washout::

    x(t+1) = (1 - alpha) * x(t) + alpha * tanh(W_in @ u(t+1) + W_res @ x(t))

Only the final state of each sequence is kept for classification.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InitializationError, ParameterError, ShapeError
from .features import FeatureMap
from .linalg import random_sparse, spectral_radius

__all__ = [
    "ReservoirSpec",
    "Reservoir",
    "build",
    "step",
    "run",
    "SOLI_SINGLE",
    "SOLI_MULTI",
    "DOPNET_SINGLE",
]

RHO_REL_TOL = 1e-3
POWER_ITERS = 10_000


@dataclass(frozen=True)
class ReservoirSpec:
    """Hyperparameters of one reservoir.

    Defaults are the single-reservoir Soli configuration.
    """

    nodes: int = 500
    spectral_radius: float = 0.95
    input_scaling: float = 0.1
    density: float = 0.3
    leaking_rate: float = 0.01
    seed: int = 0
    input_dim: int = 256

    def __post_init__(self):
        if int(self.nodes) < 1:
            raise ParameterError(f"nodes must be >= 1, got {self.nodes}")
        if int(self.input_dim) < 1:
            raise ParameterError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.spectral_radius > 0:
            raise ParameterError(f"spectral_radius must be > 0, got {self.spectral_radius}")
        if not self.input_scaling > 0:
            raise ParameterError(f"input_scaling must be > 0, got {self.input_scaling}")
        if not 0 < self.density <= 1:
            raise ParameterError(f"density must lie in (0, 1], got {self.density}")
        if not 0 < self.leaking_rate <= 1:
            raise ParameterError(f"leaking_rate must lie in (0, 1], got {self.leaking_rate}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def with_(self, **changes) -> "ReservoirSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReservoirSpec":
        fields = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        for k in ("nodes", "seed", "input_dim"):
            if k in fields:
                fields[k] = int(fields[k])
        for k in ("spectral_radius", "input_scaling", "density", "leaking_rate"):
            if k in fields:
                fields[k] = float(fields[k])
        return cls(**fields)


# Table-4 style presets; input_dim is filled in from the data.
SOLI_SINGLE = ReservoirSpec(500, 0.95, 0.1, 0.3, 0.01, input_dim=256)
SOLI_MULTI = ReservoirSpec(50, 0.95, 1.0, 0.9, 0.0263, input_dim=32)
DOPNET_SINGLE = ReservoirSpec(1000, 1.1, 0.4, 0.05, 0.05, input_dim=800)


@dataclass(frozen=True, eq=False)
class Reservoir:
    spec: ReservoirSpec
    w_in: np.ndarray
    w_res: np.ndarray
    achieved_rho: float

    @property
    def nodes(self) -> int:
        return self.spec.nodes

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim


def build(spec: ReservoirSpec) -> Reservoir:
    """Draw the fixed random weights for ``spec``.

    ``W_in`` is dense uniform on ``input_scaling * [-1, 1)``. ``W_res`` is sparse
    uniform on ``[-1, 1)`` with the given density, rescaled so its spectral
    radius equals the target. Input and recurrent weights come from two
    independent child streams of the seed, so changing ``input_dim`` leaves
    ``W_res`` untouched.
    """
    res_seq, in_seq = np.random.SeedSequence(int(spec.seed)).spawn(2)
    rng_res = np.random.Generator(np.random.PCG64(res_seq))
    rng_in = np.random.Generator(np.random.PCG64(in_seq))

    raw = random_sparse(rng_res, spec.nodes, spec.nodes, spec.density, -1.0, 1.0)
    raw_rho = spectral_radius(raw, tol=RHO_REL_TOL, max_iters=POWER_ITERS)
    if raw_rho < 1e-12:
        raise InitializationError(
            f"raw reservoir matrix has spectral radius {raw_rho:.3g} "
            f"(nodes={spec.nodes}, density={spec.density}); "
            "use a different seed or a higher density"
        )
    w_res = raw * (spec.spectral_radius / raw_rho)
    achieved = spectral_radius(w_res, tol=RHO_REL_TOL, max_iters=POWER_ITERS)
    w_in = spec.input_scaling * rng_in.uniform(-1.0, 1.0, size=(spec.nodes, spec.input_dim))
    return Reservoir(spec, w_in, w_res, achieved)


def from_weights(spec: ReservoirSpec, w_in: np.ndarray, w_res: np.ndarray,
                 achieved_rho: float) -> Reservoir:
    """Reassemble a reservoir from stored weights (used by model loading)."""
    w_in = np.ascontiguousarray(w_in, dtype=np.float64)
    w_res = np.ascontiguousarray(w_res, dtype=np.float64)
    if w_in.shape != (spec.nodes, spec.input_dim) or w_res.shape != (spec.nodes, spec.nodes):
        raise ShapeError(
            f"stored weights {w_in.shape}/{w_res.shape} do not match spec "
            f"nodes={spec.nodes}, input_dim={spec.input_dim}"
        )
    return Reservoir(spec, w_in, w_res, float(achieved_rho))


def step(res: Reservoir, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One leaky-integrator update."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.shape != (res.nodes,):
        raise ShapeError(f"state has shape {x.shape}, expected ({res.nodes},)")
    if u.shape != (res.input_dim,):
        raise ShapeError(f"input has shape {u.shape}, expected ({res.input_dim},)")
    a = res.spec.leaking_rate
    return (1.0 - a) * x + a * np.tanh(res.w_in @ u + res.w_res @ x)


def run(res: Reservoir, fmap: FeatureMap | np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
    """Final state after feeding the whole map through the reservoir.

    ``x0`` overrides the zero initial state; it exists for echo-state checks.
    """
    u = fmap.values if isinstance(fmap, FeatureMap) else np.asarray(fmap, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != res.input_dim:
        got = u.shape[1] if u.ndim == 2 else u.shape
        raise ShapeError(f"reservoir expects {res.input_dim} input channels, got {got}")
    if u.shape[0] < 1:
        raise ShapeError("feature map has no time steps")
    a = res.spec.leaking_rate
    keep = 1.0 - a
    w_res = res.w_res
    drive = u @ res.w_in.T
    if x0 is None:
        x = np.zeros(res.nodes)
    else:
        x = np.array(x0, dtype=np.float64)
        if x.shape != (res.nodes,):
            raise ShapeError(f"initial state has shape {x.shape}, expected ({res.nodes},)")
    for t in range(u.shape[0]):
        x = keep * x + a * np.tanh(drive[t] + w_res @ x)
    return x
