"""Dense/sparse tensor storage, mode unfoldings, fibers, and factor models.

Conventions
-----------
* Multi-indices, modes, and fiber row indices are 1-based in every public
  signature (matching the text file formats).  Flat offsets are 0-based and
  stay inside this module.
* Dense values are stored flat with ``i_1`` fastest-varying, so the mode-1
  unfolding is a plain reshape.
* The mode-n unfolding is the ``J_n x I_n`` matrix with
  ``J_n = prod(I_m, m != n)``; row j collects the mode-n fiber whose reduced
  index decodes to j.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend


class IndexError_(ValueError):
    """Out-of-range multi-index, mode, or fiber index."""


@dataclass(frozen=True)
class DenseTensor:
    """N-way dense array, values flat with i_1 fastest-varying."""

    shape: tuple
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 2 or any(s < 1 for s in shape):
            raise ValueError(f"need N >= 2 positive dims, got {shape}")
        values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if values.size != int(np.prod(shape)):
            raise ValueError(
                f"got {values.size} values for shape {shape} "
                f"(expected {int(np.prod(shape))})"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_ndarray(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr.ravel(order="F"))

    def to_ndarray(self):
        return self.values.reshape(self.shape, order="F")

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def __getitem__(self, index):
        return float(self.values[_flat_offset(self.shape, index)])


@dataclass(frozen=True)
class CooTensor:
    """Sparse coordinate tensor; 1-based indices, absent entries are zero."""

    shape: tuple
    indices: np.ndarray  # (nnz, N) int64, 1-based
    vals: np.ndarray  # (nnz,) float64

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 2 or any(s < 1 for s in shape):
            raise ValueError(f"need N >= 2 positive dims, got {shape}")
        idx = np.ascontiguousarray(np.atleast_2d(self.indices), dtype=np.int64)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64).ravel()
        if idx.shape[0] != vals.size or (vals.size and idx.shape[1] != len(shape)):
            raise ValueError("indices/values shape mismatch")
        if vals.size:
            if idx.min() < 1 or np.any(idx > np.asarray(shape, dtype=np.int64)):
                raise IndexError_("sparse index outside tensor bounds")
            flat = _flat_offsets(shape, idx)
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate multi-index in sparse tensor")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "vals", vals)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def nnz(self):
        return int(self.vals.size)

    def to_dense(self):
        values = np.zeros(self.size, dtype=np.float64)
        if self.nnz:
            values[_flat_offsets(self.shape, self.indices)] = self.vals
        return DenseTensor(self.shape, values)


@dataclass
class FactorModel:
    """Ordered factor matrices A_n of shape (I_n, R) sharing a rank R."""

    factors: list
    rank: int = field(init=False)

    def __post_init__(self):
        factors = [np.ascontiguousarray(a, dtype=np.float64) for a in self.factors]
        if len(factors) < 2:
            raise ValueError("need at least two factor matrices")
        ranks = {a.shape[1] for a in factors}
        if len(ranks) != 1:
            raise ValueError(f"factors disagree on rank: {sorted(ranks)}")
        (rank,) = ranks
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.factors = factors
        self.rank = int(rank)

    @property
    def shape(self):
        return tuple(a.shape[0] for a in self.factors)

    @property
    def ndim(self):
        return len(self.factors)

    def copy(self):
        return FactorModel([a.copy() for a in self.factors])

    def to_dense(self):
        """Materialize the modeled tensor (small shapes only)."""
        n = self.ndim
        subs = [chr(ord("a") + m) + "z" for m in range(n)]
        expr = ",".join(subs) + "->" + "".join(chr(ord("a") + m) for m in range(n))
        return DenseTensor.from_ndarray(np.einsum(expr, *self.factors))


def _flat_offset(shape, index):
    index = tuple(int(i) for i in index)
    if len(index) != len(shape):
        raise IndexError_(f"index {index} has wrong arity for shape {shape}")
    off = 0
    stride = 1
    for i, s in zip(index, shape):
        if not 1 <= i <= s:
            raise IndexError_(f"index {index} outside shape {shape}")
        off += (i - 1) * stride
        stride *= s
    return off


def _flat_offsets(shape, indices):
    strides = np.ones(len(shape), dtype=np.int64)
    strides[1:] = np.cumprod(shape[:-1])
    return (indices - 1) @ strides


def _check_mode(shape, n):
    if not 1 <= int(n) <= len(shape):
        raise IndexError_(f"mode {n} invalid for an order-{len(shape)} tensor")
    return int(n)


def unfolding_rows(shape, n):
    """J_n, the number of mode-n fibers."""
    n = _check_mode(shape, n)
    return math.prod(s for k, s in enumerate(shape, start=1) if k != n)


def mode_unfold_index(shape, n, index):
    """1-based unfolding row index j of the fiber through ``index``.

    j - 1 is the mixed-radix encoding of the reduced index (``index`` with
    component n removed), lowest mode fastest.
    """
    n = _check_mode(shape, n)
    _flat_offset(shape, index)  # bounds check
    j = 0
    stride = 1
    for k, (i, s) in enumerate(zip(index, shape), start=1):
        if k == n:
            continue
        j += (int(i) - 1) * stride
        stride *= s
    return j + 1


def invert_unfold_index(shape, n, j):
    """Reduced multi-index (1-based, mode n omitted) encoded by row j."""
    n = _check_mode(shape, n)
    jn = unfolding_rows(shape, n)
    if not 1 <= int(j) <= jn:
        raise IndexError_(f"fiber index {j} outside [1, {jn}]")
    rem = int(j) - 1
    out = []
    for k, s in enumerate(shape, start=1):
        if k == n:
            continue
        out.append(rem % s + 1)
        rem //= s
    return tuple(out)


def cpd_entry(model, index):
    """Model entry sum_r prod_n A_n(i_n, r) at a 1-based multi-index."""
    _flat_offset(model.shape, index)
    prod = np.ones(model.rank)
    for a, i in zip(model.factors, index):
        prod *= a[int(i) - 1, :]
    return float(prod.sum())


def _fiber_array(shape, n, fiber_indices):
    jn = unfolding_rows(shape, n)
    if isinstance(fiber_indices, (set, frozenset)):
        fiber_indices = sorted(fiber_indices)
    fibers = np.asarray(fiber_indices, dtype=np.int64).ravel()
    if fibers.size == 0:
        raise IndexError_("empty fiber index set")
    if fibers.size > 1 and np.any(fibers[1:] <= fibers[:-1]):
        fibers = np.unique(fibers)
    if fibers[0] < 1 or fibers[-1] > jn:
        raise IndexError_(f"fiber index outside [1, {jn}]")
    return fibers


def khatri_rao_rows(model, n, fiber_indices):
    """Rows ``fiber_indices`` of the Khatri-Rao product with mode n omitted.

    Equals extracting those rows from the full column-wise Kronecker
    product, without ever forming the J_n x R matrix.
    """
    n = _check_mode(model.shape, n)
    fibers = _fiber_array(model.shape, n, fiber_indices)
    return backend.kernels().kr_rows(model.factors, n - 1, fibers - 1)


def extract_fibers(tensor, n, fiber_indices):
    """Sampled unfolding rows X_n(F, :) as a dense (|F|, I_n) matrix."""
    n = _check_mode(tensor.shape, n)
    fibers = _fiber_array(tensor.shape, n, fiber_indices)
    if isinstance(tensor, DenseTensor):
        shape = np.asarray(tensor.shape, dtype=np.int64)
        return backend.kernels().dense_fiber_rows(tensor.values, shape, n - 1, fibers - 1)
    return _coo_fiber_rows(tensor, n, fibers)


def _coo_fiber_rows(tensor, n, fibers):
    shape = tensor.shape
    out = np.zeros((fibers.size, shape[n - 1]), dtype=np.float64)
    if tensor.nnz == 0:
        return out
    keep = np.ones(len(shape), dtype=bool)
    keep[n - 1] = False
    reduced = tensor.indices[:, keep] - 1
    radices = np.asarray([s for k, s in enumerate(shape, start=1) if k != n], dtype=np.int64)
    strides = np.ones(len(radices), dtype=np.int64)
    strides[1:] = np.cumprod(radices[:-1])
    j_all = reduced @ strides  # 0-based unfolding row of every nonzero
    order = np.argsort(j_all, kind="stable")
    j_sorted = j_all[order]
    lo = np.searchsorted(j_sorted, fibers - 1, side="left")
    hi = np.searchsorted(j_sorted, fibers - 1, side="right")
    for row, (a, b) in enumerate(zip(lo, hi)):
        sel = order[a:b]
        out[row, tensor.indices[sel, n - 1] - 1] = tensor.vals[sel]
    return out


def full_unfolding(tensor, n):
    """The complete mode-n unfolding (all J_n fibers)."""
    jn = unfolding_rows(tensor.shape, n)
    return extract_fibers(tensor, n, np.arange(1, jn + 1))
