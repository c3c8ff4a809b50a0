"""Multi-level (block) Toeplitz machinery.

A d-level Toeplitz matrix is indexed by d-tuples of per-level indices; the
entry at (row tuple i, column tuple j) depends only on the lag tuple j - i.
The whole matrix is therefore parameterized by a generator tensor whose mode
k has odd length 2*dim_k - 1 and whose center index dim_k - 1 holds lag 0.

Conventions used throughout:
  * level order is slowest-first: a flat row index decomposes C-style, e.g.
    for dims (N, Mv, Mh) the row i = n*(Mv*Mh) + mv*Mh + mh;
  * the generator entry for lag (l1, .., ld) sits at tensor index
    (l1 + dim_1 - 1, .., ld + dim_d - 1);
  * generator vectors are C-order ravels of the generator tensor, while
    vectorized matrices (as consumed by transforming_matrix) are column-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import prod

import numpy as np

# Cap on dense intermediates (complex entries) for matrix builders.
MAX_DENSE_ELEMENTS = 1 << 26


def _dims_from_generator_shape(shape: tuple[int, ...]) -> tuple[int, ...]:
    if len(shape) == 0:
        raise ValueError("generator must have at least one mode")
    dims = []
    for s in shape:
        if s < 1 or s % 2 == 0:
            raise ValueError(
                f"generator modes must have odd length >= 1, got shape {shape}"
            )
        dims.append((s + 1) // 2)
    return tuple(dims)


def _validate_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    return dims


def toeplitz_d(gen: np.ndarray) -> np.ndarray:
    """Build the dense d-level Toeplitz matrix from its generator tensor.

    Pure indexing, no arithmetic: entry (i, j) is gen at the per-level lags
    of j - i, so the result is exact for any dtype.
    """
    gen = np.asarray(gen)
    dims = _dims_from_generator_shape(gen.shape)
    side = prod(dims)
    if side * side > MAX_DENSE_ELEMENTS:
        raise ValueError(
            f"dense output would need {side}x{side} entries; "
            f"refusing above {MAX_DENSE_ELEMENTS} elements"
        )
    coords = np.unravel_index(np.arange(side), dims)
    idx = tuple(c[None, :] - c[:, None] + (d - 1) for c, d in zip(coords, dims))
    return gen[idx]


def toeplitz1(gen: np.ndarray) -> np.ndarray:
    """1-level special case: gen has length 2k-1, output is k x k."""
    gen = np.asarray(gen)
    if gen.ndim != 1:
        raise ValueError("toeplitz1 expects a 1-D generator")
    return toeplitz_d(gen)


@dataclass(frozen=True)
class LagIndexSets:
    """Partition of the (side x side) index grid by generator lag.

    lag_map[i, j] is the C-order flat generator index of the lag carried by
    cell (i, j); counts[l] is the cardinality of lag l's cell set. Every
    cell belongs to exactly one lag, so counts sums to side**2.
    """

    dims: tuple[int, ...]
    lag_map: np.ndarray
    counts: np.ndarray

    @property
    def side(self) -> int:
        return prod(self.dims)

    @property
    def generator_shape(self) -> tuple[int, ...]:
        return tuple(2 * d - 1 for d in self.dims)

    @property
    def n_lags(self) -> int:
        return prod(self.generator_shape)

    def positions(self, flat_lag: int) -> np.ndarray:
        """All (row, col) cells carrying the given flat lag, lexicographic."""
        if not 0 <= flat_lag < self.n_lags:
            raise ValueError(f"flat lag {flat_lag} out of range")
        return np.argwhere(self.lag_map == flat_lag)

    def flat_lag(self, lags: tuple[int, ...]) -> int:
        """Flat generator index of a signed lag tuple."""
        if len(lags) != len(self.dims):
            raise ValueError("lag tuple has wrong length")
        shifted = tuple(l + d - 1 for l, d in zip(lags, self.dims))
        return int(np.ravel_multi_index(shifted, self.generator_shape))


@lru_cache(maxsize=32)
def _lag_index_sets_cached(dims: tuple[int, ...]) -> LagIndexSets:
    gshape = tuple(2 * d - 1 for d in dims)
    side = prod(dims)
    coords = np.unravel_index(np.arange(side), dims)
    per_mode = tuple(
        c[None, :] - c[:, None] + (d - 1) for c, d in zip(coords, dims)
    )
    lag_map = np.ravel_multi_index(per_mode, gshape)
    counts = np.bincount(lag_map.ravel(), minlength=prod(gshape))
    lag_map.setflags(write=False)
    counts.setflags(write=False)
    return LagIndexSets(dims=dims, lag_map=lag_map, counts=counts)


def lag_index_sets(dims) -> LagIndexSets:
    """Cached lag partition for the given per-level dims."""
    return _lag_index_sets_cached(_validate_dims(dims))


def toeplitz_adjoint_average(m: np.ndarray, sets: LagIndexSets) -> np.ndarray:
    """Per-lag averages of a matrix: the generator tensor whose Toeplitz
    matrix is the least-squares-closest to m in Frobenius norm.

    Exact inverse of toeplitz_d whenever every per-lag sum is representable
    (always true in exact arithmetic; one rounding per sum and division in
    floating point).
    """
    m = np.asarray(m)
    side = sets.side
    if m.shape != (side, side):
        raise ValueError(f"matrix shape {m.shape} does not match dims {sets.dims}")
    flat = sets.lag_map.ravel()
    w = np.ascontiguousarray(m).ravel()
    n = sets.n_lags
    sums = np.bincount(flat, weights=w.real, minlength=n)
    if np.iscomplexobj(m):
        sums = sums + 1j * np.bincount(flat, weights=w.imag, minlength=n)
    return (sums / sets.counts).reshape(sets.generator_shape)


def transforming_matrix(
    w: np.ndarray, sets: LagIndexSets, max_elements: int = MAX_DENSE_ELEMENTS
) -> np.ndarray:
    """Linear map from generator vectors to vectorized compressed covariances.

    For a J x side matrix W, returns the J**2 x n_lags matrix K with
        K @ gen.ravel() == (W @ toeplitz_d(gen) @ W.conj().T).ravel(order="F")
    for every generator. Column l sums conj(W[:, j]) kron W[:, i] over the
    cells (i, j) of lag l.
    """
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2:
        raise ValueError("w must be a 2-D matrix")
    j_slots, side = w.shape
    if side != sets.side:
        raise ValueError(f"w has {side} columns, dims {sets.dims} need {sets.side}")
    n = sets.n_lags
    if j_slots**2 * max(n, side**2) > max_elements:
        raise ValueError(
            f"transforming matrix of shape ({j_slots**2}, {n}) exceeds the "
            f"{max_elements}-element cap"
        )
    # Columns of kron(conj(W), W) follow column-major cell order (i fast).
    kron = np.kron(w.conj(), w)
    col_lags = sets.lag_map.ravel(order="F")
    out = np.zeros((n, j_slots * j_slots), dtype=complex)
    np.add.at(out, col_lags, kron.T)
    return np.ascontiguousarray(out.T)


@dataclass(frozen=True)
class ToeplitzGenerator3:
    """Generator tensor of a 3-level Toeplitz matrix, shape
    (2N-1, 2Mv-1, 2Mh-1) for per-level dims (N, Mv, Mh)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError("generator tensor must have 3 modes")
        _dims_from_generator_shape(data.shape)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return _dims_from_generator_shape(self.data.shape)  # type: ignore[return-value]

    @classmethod
    def zeros(cls, dims) -> "ToeplitzGenerator3":
        dims = _validate_dims(dims)
        if len(dims) != 3:
            raise ValueError("dims must have length 3")
        return cls(np.zeros(tuple(2 * d - 1 for d in dims), dtype=complex))

    def lag(self, l1: int, l2: int, l3: int) -> complex:
        n, mv, mh = self.dims
        return self.data[l1 + n - 1, l2 + mv - 1, l3 + mh - 1]

    def matrix(self) -> np.ndarray:
        return toeplitz_d(self.data)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        """True when lag negation conjugates the tensor, i.e. the dense
        matrix is Hermitian."""
        flipped = np.conj(self.data[::-1, ::-1, ::-1])
        scale = max(float(np.max(np.abs(self.data))), 1e-300)
        return bool(np.max(np.abs(self.data - flipped)) <= tol * scale)
