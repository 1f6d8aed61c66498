"""Sampled block gradients from fiber data.

With X-hat the sampled unfolding rows, H-hat the matching Khatri-Rao rows,
and M = H-hat A^T the model rows, the gradient of the fiber-sampled
objective in the mode's factor A is

    G = (1 / (|F| I_n)) D^T H-hat,   D(j, i) = dl/dm (X(j,i), M(j,i)).

``sampled_gradient`` dispatches to fused per-loss kernels; the plain
chain-rule composition is kept as :func:`generic_gradient` and doubles as
the oracle the kernels are tested against.
"""

import numpy as np

from . import backend
from .losses import DomainError, check_domain, loss_grad_m


def _validate_m(loss, xhat, m):
    if loss.m_domain == "nonnegative" and np.min(m) < 0:
        j, i = np.unravel_index(int(np.argmin(m)), m.shape)
        raise DomainError(
            f"model entry m({j + 1},{i + 1}) = {m[j, i]:g} is negative "
            f"for loss {loss.kind}"
        )
    check_domain(loss, x=xhat)


def sampled_gradient(loss, xhat, hhat, a_t, validate=True):
    """Gradient of the sampled objective in A, shape (I_n, R)."""
    xhat = np.ascontiguousarray(xhat, dtype=np.float64)
    hhat = np.ascontiguousarray(hhat, dtype=np.float64)
    a_t = np.ascontiguousarray(a_t, dtype=np.float64)
    if xhat.shape[0] != hhat.shape[0] or hhat.shape[1] != a_t.shape[1] \
            or xhat.shape[1] != a_t.shape[0]:
        raise ValueError(
            f"inconsistent shapes X{xhat.shape} H{hhat.shape} A{a_t.shape}"
        )
    if validate:
        _validate_m(loss, xhat, hhat @ a_t.T)
    beta = loss.beta if loss.kind == "beta_div" else 0.0
    return backend.kernels().grad_rows(loss.loss_id, beta, loss.epsilon,
                                       xhat, hhat, a_t)


def generic_gradient(loss, xhat, hhat, a_t):
    """Chain-rule reference path: build D explicitly, then D^T H / (|F| I_n)."""
    xhat = np.asarray(xhat, dtype=np.float64)
    hhat = np.asarray(hhat, dtype=np.float64)
    a_t = np.asarray(a_t, dtype=np.float64)
    m = hhat @ a_t.T
    _validate_m(loss, xhat, m)
    d = loss_grad_m(loss, xhat, m, validate=False)
    return d.T @ hhat / (xhat.shape[0] * xhat.shape[1])


def sampled_objective(loss, xhat, hhat, a, include_constant=False):
    """The fiber-sampled cost (1/(|F| I_n)) sum l(X, H A^T)."""
    from .losses import loss_value

    xhat = np.asarray(xhat, dtype=np.float64)
    m = np.asarray(hhat, dtype=np.float64) @ np.asarray(a, dtype=np.float64).T
    _validate_m(loss, xhat, m)
    vals = loss_value(loss, xhat, m, include_constant=include_constant, validate=False)
    return float(np.sum(vals) / (xhat.shape[0] * xhat.shape[1]))
