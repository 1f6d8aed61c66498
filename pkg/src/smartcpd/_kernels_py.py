"""NumPy reference implementations of the per-iteration hot kernels.

Every function here has a twin in the compiled module ``smartcpd._core``;
:mod:`smartcpd.backend` picks one set at import time.  All indices at this
level are 0-based; the public modules convert from the 1-based convention.

Loss and generator codes shared with the compiled core:

====  ================  ====  =============
code  loss              code  generator
====  ================  ====  =============
0     euclidean         0     quadratic
1     is_div            1     neglog
2     beta_div          2     entropy
3     gen_kl            3     power(c)
4     poisson_explink
5     bernoulli_odds
6     logistic
====  ================  ====  =============
"""

import numpy as np

BACKEND_NAME = "python"

LOSS_EUCLIDEAN = 0
LOSS_IS = 1
LOSS_BETA = 2
LOSS_GEN_KL = 3
LOSS_POISSON_EXP = 4
LOSS_BERN_ODDS = 5
LOSS_LOGISTIC = 6


def _strides(shape):
    """Flat strides for i_1-fastest storage: S_k = prod(shape[:k])."""
    s = np.ones(len(shape), dtype=np.int64)
    s[1:] = np.cumprod(shape[:-1])
    return s


def _fiber_digits(shape, n0, fibers0):
    """Decode reduced fiber indices into per-mode digits (modes != n0)."""
    rem = np.asarray(fibers0, dtype=np.int64).copy()
    digits = []
    for k in range(len(shape)):
        if k == n0:
            digits.append(None)
            continue
        digits.append(rem % shape[k])
        rem //= shape[k]
    return digits


def kr_rows(factors, n0, fibers0):
    """Rows of the Khatri-Rao product of all factors except mode ``n0``.

    Row for fiber j is the entrywise product over m != n0 of
    ``factors[m][i_m, :]``, where (i_m) is the decoded multi-index of j.
    """
    shape = np.array([f.shape[0] for f in factors], dtype=np.int64)
    digits = _fiber_digits(shape, n0, fibers0)
    out = None
    for m, d in enumerate(digits):
        if d is None:
            continue
        rows = factors[m][d, :]
        out = rows.copy() if out is None else out * rows
    return out


def dense_fiber_rows(values, shape, n0, fibers0):
    """Extract mode-``n0`` fibers of a flat (i_1-fastest) dense tensor."""
    shape = np.asarray(shape, dtype=np.int64)
    strides = _strides(shape)
    digits = _fiber_digits(shape, n0, fibers0)
    base = np.zeros(len(fibers0), dtype=np.int64)
    for k, d in enumerate(digits):
        if d is not None:
            base += d * strides[k]
    offs = base[:, None] + strides[n0] * np.arange(shape[n0], dtype=np.int64)[None, :]
    return values[offs]


def _sigmoid(m):
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def _elementwise_dloss(loss_id, beta, eps, x, m):
    if loss_id == LOSS_EUCLIDEAN:
        return m - x
    if loss_id == LOSS_IS:
        return (m - x + eps) / (m + eps) ** 2
    if loss_id == LOSS_BETA:
        return (m + eps) ** (beta - 2.0) * (m - x + eps)
    if loss_id == LOSS_GEN_KL:
        return 1.0 - x / (m + eps)
    if loss_id == LOSS_POISSON_EXP:
        return np.exp(m) - x
    if loss_id == LOSS_BERN_ODDS:
        return 1.0 / (m + 1.0) - x / (m + eps)
    if loss_id == LOSS_LOGISTIC:
        return _sigmoid(m) - x
    raise ValueError(f"unknown loss id {loss_id}")


def grad_rows(loss_id, beta, eps, xhat, hhat, a):
    """Sampled block gradient (1/(B*I)) D^T H with D = dloss(X, H A^T)."""
    nfib, icur = xhat.shape
    m = hhat @ a.T
    d = _elementwise_dloss(loss_id, beta, eps, xhat, m)
    return d.T @ hhat / (nfib * icur)


def adagrad_step(acc, g, b):
    """Fold g**2 into the accumulator, then return sqrt(acc + b).

    Including the current gradient bounds every |g|/Gamma ratio by 1, which
    keeps the first touch of a coordinate from overshooting.
    """
    acc += g * g
    return np.sqrt(acc + b)


def jensen_gamma(loss_id, beta, xhat, hhat, a, gamma_min):
    """Per-coordinate majorization scalings for the registered loss rows.

    Returns None when a model-row entry is nonpositive (caller raises).
    """
    nfib, icur = xhat.shape
    m = hhat @ a.T
    if np.min(m) <= 0.0:
        return None
    pref = 1.0 / (nfib * icur)
    if loss_id == LOSS_EUCLIDEAN:
        gamma = pref * (m.T @ hhat) / a
    elif loss_id == LOSS_IS:
        gamma = pref * a * a * ((xhat / (m * m)).T @ hhat)
    elif loss_id in (LOSS_GEN_KL, LOSS_BERN_ODDS):
        gamma = pref * a * ((xhat / m).T @ hhat)
    elif loss_id == LOSS_BETA and beta > 1.0:
        gamma = (pref / beta) * (m ** (beta - 1.0)).T @ hhat * a ** (1.0 - beta)
    elif loss_id == LOSS_BETA and beta < 1.0:
        gamma = (pref / (1.0 - beta)) * (xhat * m ** (beta - 2.0)).T @ hhat * a ** (2.0 - beta)
    else:
        raise ValueError(f"no Jensen scaling for loss id {loss_id}")
    return np.maximum(gamma, gamma_min)


_EXP_CAP = 700.0  # exp argument cap; beyond it float64 overflows anyway


def update_entropy(a, g, gamma, floor):
    return np.maximum(a * np.exp(np.clip(-g / gamma, -_EXP_CAP, _EXP_CAP)), floor)


def update_entropy_simplex(a, g, gamma, floor):
    out = np.maximum(a * np.exp(np.clip(-g / gamma, -_EXP_CAP, _EXP_CAP)), floor)
    out /= out.sum(axis=0, keepdims=True)
    return out


def update_neglog(a, g, gamma, floor):
    denom = 1.0 + g * a / gamma
    if np.min(denom) <= 0.0:
        return False, None
    return True, np.maximum(a / denom, floor)


def update_power(a, g, gamma, c, floor):
    base = a ** (c - 1.0) - g / (c * gamma)
    if np.min(base) <= 0.0:
        return False, None
    return True, np.maximum(base ** (1.0 / (c - 1.0)), floor)


def update_quadratic(a, g, gamma, nonneg):
    out = a - g / gamma
    if nonneg:
        np.maximum(out, 0.0, out=out)
    return out
