"""Per-coordinate step-size matrices Gamma and scalar step schedules.

Three families:

* scalar schedules (constant eta, 1/sqrt(T) over a fixed horizon, and
  diminishing eta0/(1+t)^alpha) yield Gamma = (1/eta) * ones;
* the Adagrad rule Gamma = sqrt(sum of past squared gradients + b),
  accumulated per coordinate and per mode;
* Jensen scalings, which pick Gamma so that the linearized loss plus
  Gamma-weighted Bregman distances majorizes the sampled objective with
  equality at the current iterate.  Each supported loss pairs with one
  generator:

  ===============  ==========  =================================================
  loss             phi         Gamma (times 1/(|F| I_n), before the floor)
  ===============  ==========  =================================================
  euclidean        quadratic   (M^T H) / A
  is               power(-1)   A^2 * ((X / M^2)^T H)
  gen-kl           neglog      A * ((X / M)^T H)
  bernoulli-odds   neglog      A * ((X / M)^T H)
  beta (B >= 2)    power(B)    (1/B) ((M^(B-1))^T H) / A^(B-1)
  beta (B < 1)     power(B-1)  (1/(1-B)) ((X * M^(B-2))^T H) * A^(2-B)
  ===============  ==========  =================================================

  with M = H A^T the model rows on the sampled fibers.  For beta in (1, 2)
  the concave-part linearization underestimates a convex term and no finite
  scaling majorizes globally, so no rule is registered there.

The mixed policy starts from the Jensen scheme and hands over to Adagrad
with the quadratic generator once the epoch cost change stalls.
"""

import numpy as np
from dataclasses import dataclass, field

from . import backend
from .losses import DomainError

JENSEN_GAMMA_MIN = 1e-8

_JENSEN_PHI = {
    "euclidean": ("quadratic", None),
    "is_div": ("power", -1.0),
    "gen_kl": ("neglog", None),
    "bernoulli_odds": ("neglog", None),
}


@dataclass
class AdagradState:
    """One squared-gradient accumulator per mode, same shape as the factor."""

    shapes: list
    b: float = 1e-5
    accumulators: list = field(init=False)

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("b must be positive")
        self.accumulators = [np.zeros(tuple(s), dtype=np.float64) for s in self.shapes]


def adagrad_gamma(state, n, g):
    """Gamma for mode n: absorb g**2, then take sqrt(accumulator + b).

    The accumulator includes the current gradient, so |g| / Gamma never
    exceeds 1 and a coordinate's first update cannot overshoot; Gamma is
    entrywise nondecreasing over any call sequence.
    """
    acc = state.accumulators[n - 1]
    g = np.asarray(g, dtype=np.float64)
    if g.shape != acc.shape:
        raise ValueError(f"gradient shape {g.shape} != accumulator {acc.shape}")
    return backend.kernels().adagrad_step(acc, g, state.b)


def jensen_generator(loss):
    """(generator, power exponent) paired with this loss's Jensen rule."""
    if loss.kind == "beta_div":
        if loss.beta >= 2.0:
            return ("power", float(loss.beta))
        if loss.beta < 1.0:
            return ("power", float(loss.beta) - 1.0)
        raise ValueError(
            f"no Jensen scaling for beta={loss.beta:g} in (1, 2); use adagrad"
        )
    if loss.kind in _JENSEN_PHI:
        return _JENSEN_PHI[loss.kind]
    raise ValueError(f"no Jensen scaling registered for loss {loss.kind!r}")


def jensen_gamma(loss, xhat, hhat, a_t, gamma_min=JENSEN_GAMMA_MIN):
    """Majorization scalings on the sampled fibers, floored at gamma_min."""
    jensen_generator(loss)  # reject unsupported losses up front
    xhat = np.asarray(xhat, dtype=np.float64)
    hhat = np.asarray(hhat, dtype=np.float64)
    a_t = np.asarray(a_t, dtype=np.float64)
    beta = loss.beta if loss.kind == "beta_div" else 0.0
    gamma = backend.kernels().jensen_gamma(loss.loss_id, beta, xhat, hhat, a_t, gamma_min)
    if gamma is None:
        raise DomainError("model rows must be strictly positive for Jensen scalings")
    return gamma


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str
    eta: float = None  # constant
    horizon: int = None  # sqrt_horizon
    eta0: float = 1.0  # diminishing
    alpha: float = 0.6  # diminishing
    b: float = 1e-5  # adagrad / mixed
    switch_tol: float = 1e-4  # mixed

    _KINDS = ("constant", "sqrt_horizon", "diminishing", "adagrad", "jensen", "mixed")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown schedule {self.kind!r} (have {self._KINDS})")
        if self.kind == "constant" and (self.eta is None or self.eta <= 0):
            raise ValueError("constant schedule needs eta > 0")
        if self.kind == "sqrt_horizon" and (self.horizon is None or self.horizon < 1):
            raise ValueError("sqrt_horizon schedule needs a horizon T >= 1")
        if self.kind == "diminishing":
            if not 0.5 < self.alpha <= 1.0:
                raise ValueError("diminishing needs alpha in (0.5, 1]")
            if self.eta0 <= 0:
                raise ValueError("diminishing needs eta0 > 0")
        if self.kind in ("adagrad", "mixed") and self.b <= 0:
            raise ValueError("adagrad offset b must be positive")
        if self.kind == "mixed" and self.switch_tol <= 0:
            raise ValueError("mixed switch tolerance must be positive")

    @property
    def scalar(self):
        return self.kind in ("constant", "sqrt_horizon", "diminishing")


def scalar_eta(spec, t):
    """Step size eta_t for the scalar schedules."""
    if t < 0:
        raise ValueError("iteration must be >= 0")
    if spec.kind == "constant":
        return float(spec.eta)
    if spec.kind == "sqrt_horizon":
        return 1.0 / np.sqrt(spec.horizon)
    if spec.kind == "diminishing":
        return float(spec.eta0 / (1.0 + t) ** spec.alpha)
    raise ValueError(f"schedule {spec.kind!r} has no scalar eta")


def parse_schedule(name):
    """Parse CLI-style schedule names.

    Examples: 'adagrad:b=1e-5', 'constant:0.1', 'sqrt:T=400',
    'diminishing:eta0=1,alpha=0.6', 'jensen', 'mixed:switch_tol=1e-4'.
    """
    name = name.strip().lower()
    head, _, tail = name.partition(":")
    kv = {}
    positional = None
    if tail:
        for part in tail.split(","):
            if "=" in part:
                key, val = part.split("=", 1)
                kv[key.strip()] = float(val)
            else:
                positional = float(part)
    if head == "constant":
        return ScheduleSpec("constant", eta=kv.get("eta", positional))
    if head in ("sqrt", "sqrt_horizon"):
        horizon = kv.get("t", positional)
        return ScheduleSpec("sqrt_horizon", horizon=int(horizon) if horizon else None)
    if head == "diminishing":
        return ScheduleSpec("diminishing", eta0=kv.get("eta0", positional or 1.0),
                            alpha=kv.get("alpha", 0.6))
    if head == "adagrad":
        return ScheduleSpec("adagrad", b=kv.get("b", positional or 1e-5))
    if head == "jensen":
        return ScheduleSpec("jensen")
    if head == "mixed":
        return ScheduleSpec("mixed", b=kv.get("b", 1e-5),
                            switch_tol=kv.get("switch_tol", positional or 1e-4))
    raise ValueError(f"unknown schedule name {name!r}")
