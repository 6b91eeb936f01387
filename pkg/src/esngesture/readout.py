"""Ridge-regression readouts.

States are collected as columns of ``X`` (features x samples) and one-hot
targets as columns of ``Y`` (classes x samples). The output weights are the
closed-form minimizer of ``||Y - W X||^2 + lam ||W||^2``::

    W_out = Y X^T (X X^T + lam I)^-1

computed by a Cholesky solve of ``(X X^T + lam I) W_out^T = X Y^T``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError, ShapeError
from .linalg import solve_spd

__all__ = [
    "Expansion",
    "DesignMatrices",
    "RidgeReadout",
    "expand",
    "expand_rows",
    "one_hot",
    "design_matrices",
    "fit_ridge",
    "predict",
]

DEFAULT_LAMBDA = 0.1


class Expansion(str, Enum):
    LINEAR = "linear"
    TANH = "tanh_expanded"


def expand(r, mode: Expansion | str = Expansion.LINEAR) -> np.ndarray:
    """Feature vector for state ``r``; ``tanh_expanded`` gives ``[1, r, tanh(r)]``."""
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    if Expansion(mode) is Expansion.LINEAR:
        return r
    return np.concatenate([[1.0], r, np.tanh(r)])


def expand_rows(states, mode: Expansion | str = Expansion.LINEAR) -> np.ndarray:
    """Row-wise :func:`expand` over an ``(S, F)`` array of states."""
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if Expansion(mode) is Expansion.LINEAR:
        return s
    return np.hstack([np.ones((s.shape[0], 1)), s, np.tanh(s)])


def one_hot(labels, n_classes: int) -> np.ndarray:
    """``(C, S)`` one-hot matrix for integer labels in ``[0, n_classes)``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ParameterError(f"labels must lie in [0, {n_classes})")
    y = np.zeros((n_classes, labels.size))
    y[labels, np.arange(labels.size)] = 1.0
    return y


@dataclass(frozen=True)
class DesignMatrices:
    x: np.ndarray  # (F, S), one state per column
    y: np.ndarray  # (C, S), one-hot

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 2 or self.x.shape[1] != self.y.shape[1]:
            raise ShapeError(f"design shapes {self.x.shape} and {self.y.shape} disagree")


def design_matrices(states, labels, n_classes: int,
                    expansion: Expansion | str = Expansion.LINEAR) -> DesignMatrices:
    """Assemble ``X``/``Y`` from row-wise states and integer labels."""
    x = expand_rows(states, expansion).T
    y = one_hot(labels, n_classes)
    if y.shape[1] < n_classes:
        warnings.warn(f"only {y.shape[1]} samples for {n_classes} classes", stacklevel=2)
    return DesignMatrices(np.ascontiguousarray(x), y)


@dataclass(frozen=True, eq=False)
class RidgeReadout:
    w_out: np.ndarray  # (C, F)
    lam: float
    expansion: Expansion
    labels: tuple
    train_residual: float = float("nan")

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[0]

    def decision(self, states) -> np.ndarray:
        """Score matrix ``(S, C)`` for row-wise states."""
        f = expand_rows(states, self.expansion)
        if f.shape[1] != self.w_out.shape[1]:
            raise ShapeError(
                f"readout expects {self.w_out.shape[1]} features after expansion, got {f.shape[1]}"
            )
        return f @ self.w_out.T

    def predict(self, states) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest class index
        return np.argmax(self.decision(states), axis=1)


def fit_ridge(d: DesignMatrices, lam: float = DEFAULT_LAMBDA,
              expansion: Expansion | str = Expansion.LINEAR, labels=None) -> RidgeReadout:
    if not lam > 0:
        raise ParameterError(f"ridge lambda must be > 0, got {lam}")
    x, y = d.x, d.y
    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += lam
    w_out = solve_spd(gram, x @ y.T).T
    residual = float(np.linalg.norm(y - w_out @ x))
    if labels is None:
        labels = tuple(range(y.shape[0]))
    return RidgeReadout(np.ascontiguousarray(w_out), float(lam), Expansion(expansion),
                        tuple(labels), residual)


def predict(m: RidgeReadout, r) -> tuple[object, np.ndarray]:
    """Label and score vector for a single state ``r``."""
    scores = m.decision(np.asarray(r, dtype=np.float64).reshape(1, -1))[0]
    return m.labels[int(np.argmax(scores))], scores
