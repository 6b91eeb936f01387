"""Dense linear algebra used by the reservoir and readout code.

Matrices are plain ``numpy.ndarray`` objects in float64. Randomness goes
through :func:`rng_stream`, a PCG64 generator, so a seed fully determines
every draw on every platform.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import lapack

from .errors import ConvergenceWarning, NumericalError, ParameterError, ShapeError

__all__ = [
    "as_matrix",
    "matmul",
    "solve_spd",
    "spectral_radius",
    "rng_stream",
    "random_sparse",
]


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim} dimensions")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix contains NaN or Inf entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ z = b`` for symmetric positive-definite ``a``.

    Uses a Cholesky factorization. Only the lower triangle of ``a`` is read.

    Raises
    ------
    NumericalError
        If the factorization meets a non-positive pivot. The message names
        the (zero-based) pivot index.
    """
    a = as_matrix(a)
    b_arr = np.asarray(b, dtype=np.float64)
    vector = b_arr.ndim == 1
    b = as_matrix(b_arr)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ShapeError(f"solve_spd needs a square matrix, got {a.shape}")
    if b.shape[0] != n:
        raise ShapeError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NumericalError(
            f"matrix is not positive definite: pivot {info - 1} is <= 0"
        )
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")
    z, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:
        raise NumericalError(f"dpotrs failed with info={info}")
    return z[:, 0] if vector else z


def spectral_radius(a, tol: float = 1e-6, max_iters: int = 10_000,
                    block: int = 12, check_every: int = 10) -> float:
    """Estimate ``max |eig(a)|`` by block power iteration.

    A block of ``block`` vectors is multiplied by ``a`` and re-orthonormalized
    each iteration; every ``check_every`` iterations the eigenvalues of the
    small projected matrix ``Q.T @ a @ Q`` give the estimate. Tracking a
    subspace rather than one vector handles complex-conjugate dominant pairs
    and clusters of near-equal moduli, both common in random reservoirs.

    The iteration stops once the estimate moves by less than ``1e-3 * tol``
    (relative) between checks. If ``max_iters`` is exhausted first, the last
    estimate is returned and a :class:`ConvergenceWarning` is emitted.

    ``a`` may be a dense array or a ``scipy.sparse`` matrix. A zero matrix
    returns exactly 0.
    """
    shape = a.shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ShapeError(f"spectral_radius needs a square matrix, got {shape}")
    n = shape[0]
    if n == 0:
        raise ShapeError("spectral_radius of an empty matrix")
    if _is_zero(a):
        return 0.0
    k = min(block, n)
    start = np.random.default_rng(0x5EED).standard_normal((n, k))
    start[:, 0] = 1.0
    q, _ = np.linalg.qr(start)
    estimate = None
    for it in range(1, max_iters + 1):
        z = np.asarray(a @ q)
        if it % check_every == 0 or it == max_iters:
            ritz = np.linalg.eigvals(q.T @ z)
            value = float(np.abs(ritz).max())
            if value == 0.0:
                # The block landed in the null space; the radius is tiny.
                return 0.0
            if estimate is not None and abs(value - estimate) <= 1e-3 * tol * value:
                return value
            estimate = value
        q, _ = np.linalg.qr(z)
    warnings.warn(
        f"spectral_radius did not converge in {max_iters} iterations",
        ConvergenceWarning,
        stacklevel=2,
    )
    return estimate


def _is_zero(a) -> bool:
    if hasattr(a, "nnz"):
        return a.count_nonzero() == 0
    return not np.any(a)


def rng_stream(seed: int) -> np.random.Generator:
    """Deterministic generator for ``seed`` (PCG64, platform independent)."""
    if not 0 <= int(seed) < 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_sparse(rng: np.random.Generator, rows: int, cols: int,
                  density: float, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Random matrix whose entries are nonzero with probability ``density``.

    Nonzero values are uniform on ``[low, high)``. Returned dense, since the
    reservoirs used here are small enough that dense products win.
    """
    if not 0.0 < density <= 1.0:
        raise ParameterError(f"density must lie in (0, 1], got {density}")
    if not low < high:
        raise ParameterError(f"need low < high, got [{low}, {high}]")
    mask = rng.random((rows, cols)) < density
    values = rng.uniform(low, high, size=(rows, cols))
    return np.where(mask, values, 0.0)
