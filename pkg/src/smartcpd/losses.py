"""Scalar loss catalog: values, derivatives, domains, convex-concave splits.

Each loss measures the misfit between a data entry x and a model entry m.
The catalog (selected by name):

==================  =======================================  ==========  =========
name                l(x, m)                                  m domain    x domain
==================  =======================================  ==========  =========
``euclidean``       (x - m)^2 / 2                            reals       reals
``is``              x/(m+eps) + log(m+eps)                   m >= 0      x >= 0
``beta:B``          (m+eps)^B/B - x (m+eps)^(B-1)/(B-1)      m >= 0      x >= 0
``gen-kl``          m - x log(m+eps)                         m >= 0      x >= 0
``poisson-exp``     e^m - x m                                reals       x >= 0
``bernoulli-odds``  log(m+1) - x log(m+eps)                  m >= 0      x in {0,1}
``logistic``        log(1+e^m) - x m                         reals       x in {0,1}
==================  =======================================  ==========  =========

The ``beta`` family excludes B in {0, 1} (those are ``is`` and ``gen-kl``),
and the shift eps > 0 keeps values and gradients finite at m = 0.  For the
divergence-family losses, ``loss_value(..., include_constant=True)`` adds
back the x-only term that makes ``l(x, x)`` vanish; the optimizer never
needs it, cost reports sometimes do.
"""

import numpy as np
from dataclasses import dataclass

from ._kernels_py import (
    LOSS_BERN_ODDS,
    LOSS_BETA,
    LOSS_EUCLIDEAN,
    LOSS_GEN_KL,
    LOSS_IS,
    LOSS_LOGISTIC,
    LOSS_POISSON_EXP,
)

DEFAULT_EPSILON = 1e-9

_KINDS = {
    "euclidean": LOSS_EUCLIDEAN,
    "is_div": LOSS_IS,
    "beta_div": LOSS_BETA,
    "gen_kl": LOSS_GEN_KL,
    "poisson_explink": LOSS_POISSON_EXP,
    "bernoulli_odds": LOSS_BERN_ODDS,
    "logistic": LOSS_LOGISTIC,
}

_NAMES = {
    "euclidean": "euclidean",
    "is": "is_div",
    "is-div": "is_div",
    "gen-kl": "gen_kl",
    "kl": "gen_kl",
    "poisson-exp": "poisson_explink",
    "bernoulli-odds": "bernoulli_odds",
    "logistic": "logistic",
}

_M_DOMAIN = {
    "euclidean": "all-reals",
    "is_div": "nonnegative",
    "beta_div": "nonnegative",
    "gen_kl": "nonnegative",
    "poisson_explink": "all-reals",
    "bernoulli_odds": "nonnegative",
    "logistic": "all-reals",
}

_X_DOMAIN = {
    "euclidean": "all-reals",
    "is_div": "nonnegative",
    "beta_div": "nonnegative",
    "gen_kl": "nonnegative",
    "poisson_explink": "count",
    "bernoulli_odds": "binary",
    "logistic": "binary",
}


class DomainError(ValueError):
    """An x or m value outside the loss's domain."""


@dataclass(frozen=True)
class LossSpec:
    kind: str
    beta: float = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r} (have {sorted(_KINDS)})")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.kind == "beta_div":
            if self.beta is None:
                raise ValueError("beta_div needs a beta value")
            if self.beta == 0.0:
                raise ValueError("beta=0 is the IS divergence; use kind 'is_div'")
            if self.beta == 1.0:
                raise ValueError("beta=1 is the generalized KL divergence; use kind 'gen_kl'")
        elif self.beta is not None:
            raise ValueError(f"{self.kind} takes no beta parameter")

    @property
    def loss_id(self):
        return _KINDS[self.kind]

    @property
    def m_domain(self):
        return _M_DOMAIN[self.kind]

    @property
    def x_domain(self):
        return _X_DOMAIN[self.kind]

    @property
    def name(self):
        if self.kind == "beta_div":
            return f"beta:{self.beta:g}"
        return {v: k for k, v in _NAMES.items() if k not in ("is-div", "kl")}[self.kind]


def parse_loss(name, epsilon=DEFAULT_EPSILON):
    """Build a LossSpec from a CLI-style name such as 'gen-kl' or 'beta:0.5'."""
    name = name.strip().lower()
    if name.startswith("beta:"):
        return LossSpec("beta_div", beta=float(name.split(":", 1)[1]), epsilon=epsilon)
    if name in _NAMES:
        return LossSpec(_NAMES[name], epsilon=epsilon)
    raise ValueError(f"unknown loss name {name!r}")


def check_domain(spec, x=None, m=None):
    """Raise DomainError when x or m leaves the loss's domain."""
    if m is not None and spec.m_domain == "nonnegative":
        m = np.asarray(m)
        if np.any(m < 0):
            raise DomainError(f"{spec.kind}: m must be nonnegative, got min {m.min()}")
    if x is not None:
        x = np.asarray(x)
        dom = spec.x_domain
        if dom in ("nonnegative", "count") and np.any(x < 0):
            raise DomainError(f"{spec.kind}: x must be nonnegative, got min {x.min()}")
        if dom == "count" and np.any(x != np.floor(x)):
            raise DomainError(f"{spec.kind}: x must be integer counts")
        if dom == "binary" and np.any((x != 0) & (x != 1)):
            raise DomainError(f"{spec.kind}: x must be 0/1")


def _softplus(m):
    # log(1 + e^m) without overflow for large m
    return np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))


def _sigmoid(m):
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def loss_value(spec, x, m, include_constant=False, validate=True):
    """Evaluate the loss elementwise (broadcasts over arrays).

    ``include_constant`` adds the x-only term of the divergence-family
    losses (is/gen-kl/beta) so that the value vanishes at m = x.
    """
    if validate:
        check_domain(spec, x=x, m=m)
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    eps = spec.epsilon
    kind = spec.kind
    if kind == "euclidean":
        out = 0.5 * (x - m) ** 2
    elif kind == "is_div":
        out = x / (m + eps) + np.log(m + eps)
        if include_constant:
            out = out - np.log(np.maximum(x, eps)) - 1.0
    elif kind == "beta_div":
        b = spec.beta
        out = (m + eps) ** b / b - x * (m + eps) ** (b - 1.0) / (b - 1.0)
        if include_constant:
            out = out + x**b / (b * (b - 1.0))
    elif kind == "gen_kl":
        out = m - x * np.log(m + eps)
        if include_constant:
            out = out + np.where(x > 0, x * np.log(np.maximum(x, eps)), 0.0) - x
    elif kind == "poisson_explink":
        out = np.exp(m) - x * m
    elif kind == "bernoulli_odds":
        out = np.log(m + 1.0) - x * np.log(m + eps)
    elif kind == "logistic":
        out = _softplus(m) - x * m
    else:  # pragma: no cover
        raise ValueError(kind)
    return out if out.shape else float(out)


def loss_grad_m(spec, x, m, validate=True):
    """Elementwise derivative of the loss in its model argument m."""
    if validate:
        check_domain(spec, x=x, m=m)
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    eps = spec.epsilon
    kind = spec.kind
    if kind == "euclidean":
        out = m - x
    elif kind == "is_div":
        out = (m - x + eps) / (m + eps) ** 2
    elif kind == "beta_div":
        out = (m + eps) ** (spec.beta - 2.0) * (m - x + eps)
    elif kind == "gen_kl":
        out = 1.0 - x / (m + eps)
    elif kind == "poisson_explink":
        out = np.exp(m) - x
    elif kind == "bernoulli_odds":
        out = 1.0 / (m + 1.0) - x / (m + eps)
    elif kind == "logistic":
        out = _sigmoid(m) - x
    else:  # pragma: no cover
        raise ValueError(kind)
    return out if out.shape else float(out)


def loss_hess_m(spec, x, m, validate=True):
    """Elementwise second derivative in m (used by curvature probes)."""
    if validate:
        check_domain(spec, x=x, m=m)
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    eps = spec.epsilon
    kind = spec.kind
    if kind == "euclidean":
        out = np.ones_like(m)
    elif kind == "is_div":
        out = (2.0 * x - m - eps) / (m + eps) ** 3
    elif kind == "beta_div":
        b = spec.beta
        out = (m + eps) ** (b - 3.0) * ((b - 1.0) * (m + eps) - (b - 2.0) * x)
    elif kind == "gen_kl":
        out = x / (m + eps) ** 2
    elif kind == "poisson_explink":
        out = np.exp(m)
    elif kind == "bernoulli_odds":
        out = -1.0 / (m + 1.0) ** 2 + x / (m + eps) ** 2
    elif kind == "logistic":
        s = _sigmoid(m)
        out = s * (1.0 - s)
    else:  # pragma: no cover
        raise ValueError(kind)
    return out if out.shape else float(out)


def convex_concave_split(spec):
    """Split the loss into (convex, concave) parts summing to it pointwise.

    Only registered for the nonnegative-m losses; the all-real-m losses
    (poisson-exp, logistic) pair with the quadratic mirror map and raise.
    """
    eps = spec.epsilon
    kind = spec.kind
    if kind == "euclidean":
        return (lambda x, m: 0.5 * (np.asarray(x, float) - m) ** 2,
                lambda x, m: np.zeros_like(np.asarray(m, float)))
    if kind == "gen_kl":
        return (lambda x, m: -x * np.log(m + eps),
                lambda x, m: np.asarray(m, float) + np.zeros_like(np.asarray(x, float)))
    if kind == "is_div":
        return (lambda x, m: x / (m + eps),
                lambda x, m: np.log(m + eps) + np.zeros_like(np.asarray(x, float)))
    if kind == "bernoulli_odds":
        return (lambda x, m: -x * np.log(m + eps),
                lambda x, m: np.log(m + 1.0) + np.zeros_like(np.asarray(x, float)))
    if kind == "beta_div":
        b = spec.beta
        if b >= 2.0:
            return (lambda x, m: (m + eps) ** b / b + np.zeros_like(np.asarray(x, float)),
                    lambda x, m: -x * (m + eps) ** (b - 1.0) / (b - 1.0))
        if b < 1.0:
            return (lambda x, m: x * (m + eps) ** (b - 1.0) / (1.0 - b),
                    lambda x, m: (m + eps) ** b / b + np.zeros_like(np.asarray(x, float)))
        # 1 < beta < 2: both printed terms are convex, so the whole loss is
        return (lambda x, m: loss_value(spec, x, m, validate=False),
                lambda x, m: np.zeros_like(np.asarray(m, float) + np.asarray(x, float)))
    raise ValueError(f"no split registered for loss {spec.kind!r}")
