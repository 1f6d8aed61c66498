"""Ground-truth factor generation and synthetic observation models.

Factors are drawn i.i.d. uniform on (0, a_max); a fraction of each column
is then redrawn from uniform (0, heavy_scale * a_max) so entry magnitudes
span an order of magnitude.  The modeled tensor M feeds one of:

* ``poisson``:        X_i ~ Poisson(M_i)
* ``bernoulli_odds``: X_i ~ Bernoulli(M_i / (1 + M_i))
* ``gamma``:          X_i = M_i * N_i, N_i ~ Gamma(k, 1/k), k = 10^(snr/10)
* ``gaussian``:       X_i = M_i + additive white noise scaled to snr_db
* ``none``:           X = M exactly

The gamma shape k makes the noise unit-mean with variance 1/k, so the
expected energy ratio ||M||^2 / ||X - M||^2 equals 10^(snr/10); gaussian
noise uses the same ratio convention.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sampler import derived_generator
from .tensor import DenseTensor, FactorModel

OBSERVATIONS = ("poisson", "bernoulli_odds", "gamma", "gaussian", "none")


@dataclass(frozen=True)
class GeneratorSpec:
    shape: tuple
    rank: int
    a_max: float = 0.5
    heavy_frac: float = 0.05
    heavy_scale: float = 10.0
    observation: str = "none"
    snr_db: float = 20.0
    simplex: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if len(self.shape) < 2 or any(s < 1 for s in self.shape):
            raise ValueError(f"bad shape {self.shape}")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if not 0.0 <= self.heavy_frac <= 1.0:
            raise ValueError("heavy_frac must lie in [0, 1]")
        if self.observation not in OBSERVATIONS:
            raise ValueError(f"unknown observation {self.observation!r}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


def gen_factors(spec):
    """Draw the ground-truth factor model for ``spec``."""
    rng = derived_generator(spec.seed, 0)
    factors = []
    for size in spec.shape:
        a = rng.uniform(0.0, spec.a_max, size=(size, spec.rank))
        n_heavy = math.ceil(spec.heavy_frac * size) if spec.heavy_frac > 0 else 0
        for r in range(spec.rank):
            if n_heavy:
                rows = rng.choice(size, size=n_heavy, replace=False)
                a[rows, r] = rng.uniform(0.0, spec.heavy_scale * spec.a_max, size=n_heavy)
        if spec.simplex:
            a /= a.sum(axis=0, keepdims=True)
        factors.append(a)
    return FactorModel(factors)


def observe(model, spec):
    """Apply the observation model to the modeled tensor."""
    m = model.to_dense().to_ndarray()
    if spec.observation in ("poisson", "bernoulli_odds", "gamma") and np.min(m) < 0:
        raise ValueError(f"{spec.observation} observation needs a nonnegative model")
    rng = derived_generator(spec.seed, 1)
    if spec.observation == "none":
        x = m
    elif spec.observation == "poisson":
        x = rng.poisson(m).astype(np.float64)
    elif spec.observation == "bernoulli_odds":
        x = (rng.random(m.shape) < m / (1.0 + m)).astype(np.float64)
    elif spec.observation == "gamma":
        k = 10.0 ** (spec.snr_db / 10.0)
        x = m * rng.gamma(shape=k, scale=1.0 / k, size=m.shape)
    elif spec.observation == "gaussian":
        sigma = math.sqrt(float(np.mean(m * m)) / 10.0 ** (spec.snr_db / 10.0))
        x = m + rng.normal(0.0, sigma, size=m.shape)
    else:  # pragma: no cover
        raise ValueError(spec.observation)
    return DenseTensor.from_ndarray(x)


def realized_snr_db(model, observed):
    """10 log10(||M||^2 / ||X - M||^2) of an actual draw."""
    m = model.to_dense().values
    resid = observed.values - m
    return float(10.0 * np.log10(np.dot(m, m) / np.dot(resid, resid)))
