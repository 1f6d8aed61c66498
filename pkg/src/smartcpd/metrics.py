"""Permutation/scale-resolved factor error and objective cost evaluation."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import tensor as tz
from .losses import loss_value


def _unit_columns(factors, label):
    out = []
    for n, a in enumerate(factors, start=1):
        norms = np.linalg.norm(a, axis=0)
        if np.any(norms == 0):
            raise ValueError(f"{label} factor {n} has a zero column")
        out.append(a / norms)
    return out


def factor_mse(estimate, truth):
    """Mean squared column error after resolving scale and permutation.

    Columns are l2-normalized (killing per-column scale), then a single
    permutation shared by all modes is chosen by optimal assignment on the
    summed per-column cost, and the value is

        (1 / (N R)) sum_n sum_r || a-hat_{n,pi(r)} - a_{n,r} ||^2 .

    Lies in [0, 4]; 0 iff the models agree up to column scaling and a
    shared column order.
    """
    if estimate.shape != truth.shape or estimate.rank != truth.rank:
        raise ValueError(
            f"model shapes disagree: {estimate.shape} rank {estimate.rank} "
            f"vs {truth.shape} rank {truth.rank}"
        )
    est = _unit_columns(estimate.factors, "estimate")
    tru = _unit_columns(truth.factors, "truth")
    rank = estimate.rank
    cost = np.zeros((rank, rank))
    for e, t in zip(est, tru):
        # cost[r, s] = || e[:, s] - t[:, r] ||^2 = 2 - 2 <t_r, e_s> on unit columns
        cost += 2.0 - 2.0 * t.T @ e
    rows, cols = linear_sum_assignment(cost)
    # 2 - 2 <t, e> can dip an ulp below zero when columns coincide
    return max(0.0, float(cost[rows, cols].sum() / (len(est) * rank)))


def objective_cost(tensor, model, loss, subsample=None, include_constant=False,
                   block_fibers=4096):
    """Average loss between tensor and model entries.

    Full variant: (1/|I|) sum over every entry.  Subsampled variant:
    ``subsample=(mode, fiber_indices)`` averages over the given unfolding
    rows only, i.e. the fiber-sampled cost.
    """
    if subsample is not None:
        mode, fibers = subsample
        fibers = np.asarray(sorted(int(j) for j in fibers), dtype=np.int64)
        return _fiber_cost(tensor, model, loss, mode, fibers, include_constant)
    mode = 1
    j_total = tz.unfolding_rows(tensor.shape, mode)
    total = 0.0
    for start in range(0, j_total, block_fibers):
        fibers = np.arange(start + 1, min(start + block_fibers, j_total) + 1)
        total += _fiber_cost(tensor, model, loss, mode, fibers, include_constant) \
            * fibers.size
    return total / j_total


def _fiber_cost(tensor, model, loss, mode, fibers, include_constant):
    xhat = tz.extract_fibers(tensor, mode, fibers)
    hhat = tz.khatri_rao_rows(model, mode, fibers)
    m = hhat @ model.factors[mode - 1].T
    if loss.m_domain == "nonnegative" and np.min(m) < 0:
        j, i = np.unravel_index(int(np.argmin(m)), m.shape)
        from .losses import DomainError

        raise DomainError(
            f"model entry at fiber {fibers[j]}, slot {i + 1} of mode {mode} "
            f"is negative for loss {loss.kind}"
        )
    vals = loss_value(loss, xhat, m, include_constant=include_constant, validate=False)
    return float(np.sum(vals) / (xhat.shape[0] * xhat.shape[1]))
