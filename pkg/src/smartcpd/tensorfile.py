"""Text file formats: coordinate tensors, factor CSVs, JSON manifests.

Tensor files are whitespace-separated text, compatible with the common
public sparse-tensor collections:

    # optional comments anywhere
    3               <- order N
    6186 24 77      <- mode sizes
    1 1 4 2.0       <- N 1-based indices followed by the value (one nonzero
    ...                per line; absent entries are zero)

Dense tensors are written in the same format with zeros omitted.  Factor
matrices go to one headerless CSV per mode (R columns, full precision).
"""

import json
import warnings

import numpy as np

from .tensor import CooTensor, DenseTensor, FactorModel


def read_tensor(path):
    """Parse a coordinate tensor file into a CooTensor."""
    with open(path) as f:
        header = []
        while len(header) < 2:
            line = f.readline()
            if not line:
                raise ValueError(f"{path}: truncated header")
            line = line.split("#", 1)[0].strip()
            if line:
                header.append(line)
        order = int(header[0])
        shape = tuple(int(s) for s in header[1].split())
        if len(shape) != order:
            raise ValueError(f"{path}: header says order {order} but lists "
                             f"{len(shape)} mode sizes")
        with warnings.catch_warnings():
            # a header-only file is a legal all-zero tensor
            warnings.filterwarnings("ignore", message=".*input contained no data.*")
            body = np.loadtxt(f, comments="#", ndmin=2, dtype=np.float64)
    if body.size == 0:
        indices = np.zeros((0, order), dtype=np.int64)
        vals = np.zeros(0)
    else:
        if body.shape[1] != order + 1:
            raise ValueError(f"{path}: entries need {order} indices + 1 value "
                             f"per line, got {body.shape[1]} fields")
        indices = body[:, :order].astype(np.int64)
        if np.any(indices != body[:, :order]):
            raise ValueError(f"{path}: non-integer index")
        vals = body[:, order]
    return CooTensor(shape, indices, vals)


def write_tensor(path, tensor):
    """Write a tensor as coordinate text (zeros omitted)."""
    if isinstance(tensor, DenseTensor):
        tensor = _dense_to_coo(tensor)
    with open(path, "w") as f:
        f.write(f"{tensor.ndim}\n")
        f.write(" ".join(str(s) for s in tensor.shape) + "\n")
        for idx, val in zip(tensor.indices, tensor.vals):
            f.write(" ".join(str(i) for i in idx) + f" {val:.17g}\n")


def _dense_to_coo(tensor):
    flat = np.flatnonzero(tensor.values)
    indices = np.empty((flat.size, tensor.ndim), dtype=np.int64)
    rem = flat.copy()
    for k, s in enumerate(tensor.shape):
        indices[:, k] = rem % s + 1
        rem //= s
    return CooTensor(tensor.shape, indices, tensor.values[flat])


def densify_if_small(tensor, max_entries=2 * 10**7):
    """Dense storage when affordable; fiber extraction is faster there."""
    if isinstance(tensor, CooTensor) and tensor.size <= max_entries:
        return tensor.to_dense()
    return tensor


def factor_path(directory, n, prefix="mode"):
    return f"{directory}/{prefix}_{n}.csv"


def write_factors(directory, model, prefix="mode"):
    paths = []
    for n, a in enumerate(model.factors, start=1):
        path = factor_path(directory, n, prefix)
        np.savetxt(path, a, delimiter=",", fmt="%.17g")
        paths.append(path)
    return paths


def read_factors(directory, n_modes, prefix="mode"):
    factors = []
    for n in range(1, n_modes + 1):
        a = np.loadtxt(factor_path(directory, n, prefix), delimiter=",", ndmin=2)
        factors.append(a)
    return FactorModel(factors)


def write_manifest(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path):
    with open(path) as f:
        return json.load(f)
