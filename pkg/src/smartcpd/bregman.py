"""Bregman generators, divergences, and closed-form mirror-descent steps.

A mirror map pairs a separable strictly convex generator phi with a
constraint set.  The supported generators and the closed-form minimizer of

    sum_ir [ G(i,r) A(i,r) + Gamma(i,r) D_phi(A(i,r), A_t(i,r)) ]

over the constraint set:

=============  ================  ==========================================
generator      constraint        update
=============  ================  ==========================================
quadratic      unconstrained     A_t - G / Gamma
quadratic      nonneg_orthant    max(A_t - G / Gamma, 0)
neglog         nonneg_orthant    A_t / (1 + G * A_t / Gamma)
entropy        nonneg_orthant    A_t * exp(-G / Gamma)
entropy        column_simplex    colnorm(A_t * exp(-G / Gamma))
power(c)       nonneg_orthant    [A_t^(c-1) - G/(c Gamma)]^(1/(c-1))
=============  ================  ==========================================

The neglog update is the stationary point of the objective (entrywise
reciprocal form); the simplex update is the exact constrained minimizer
when Gamma is constant within each column and the standard feasible
surrogate otherwise.  For the power rule the bracketed base can leave the
domain; the step is then rejected with :class:`DomainExitError` and the
caller retries with a larger Gamma (a shorter step).  The same rejection
applies to a nonpositive neglog denominator.
"""

import numpy as np
from dataclasses import dataclass

from . import backend

GENERATORS = ("quadratic", "neglog", "entropy", "power")
CONSTRAINTS = ("unconstrained", "nonneg_orthant", "column_simplex")

_ALLOWED = {
    "quadratic": ("unconstrained", "nonneg_orthant"),
    "neglog": ("nonneg_orthant",),
    "entropy": ("nonneg_orthant", "column_simplex"),
    "power": ("nonneg_orthant",),
}

DEFAULT_FLOOR = 1e-12


class DomainExitError(RuntimeError):
    """A closed-form step left the generator's domain; retry shorter."""


@dataclass(frozen=True)
class MirrorMap:
    generator: str
    constraint: str = "nonneg_orthant"
    power_c: float = None
    domain_floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.constraint not in _ALLOWED[self.generator]:
            raise ValueError(
                f"generator {self.generator!r} has no closed form under "
                f"{self.constraint!r}"
            )
        if self.generator == "power":
            c = self.power_c
            if c is None or not (c > 1.0 or c < 0.0):
                raise ValueError("power generator needs c > 1 or c < 0")
        elif self.power_c is not None:
            raise ValueError(f"{self.generator} takes no exponent")
        if self.domain_floor <= 0:
            raise ValueError("domain_floor must be positive")

    @property
    def positive_domain(self):
        return self.generator in ("neglog", "entropy", "power")

    @property
    def name(self):
        if self.generator == "power":
            return f"power:{self.power_c:g}"
        return self.generator


def parse_mirror(name, constraint="nonneg_orthant", domain_floor=DEFAULT_FLOOR):
    """Build a MirrorMap from names like 'entropy' or 'power:1.5'."""
    name = name.strip().lower()
    if name.startswith("power:"):
        return MirrorMap("power", constraint, power_c=float(name.split(":", 1)[1]),
                         domain_floor=domain_floor)
    return MirrorMap(name, constraint, domain_floor=domain_floor)


def _check_domain(mmap, arr, label):
    if mmap.positive_domain and np.any(np.asarray(arr) <= 0):
        raise ValueError(f"{label} must be strictly positive for phi={mmap.generator}")


def generator_value(mmap, a):
    a = np.asarray(a, dtype=np.float64)
    if mmap.generator == "quadratic":
        return 0.5 * a * a
    if mmap.generator == "neglog":
        return -np.log(a)
    if mmap.generator == "entropy":
        return a * np.log(a)
    return a ** mmap.power_c


def generator_grad(mmap, a):
    a = np.asarray(a, dtype=np.float64)
    if mmap.generator == "quadratic":
        return a
    if mmap.generator == "neglog":
        return -1.0 / a
    if mmap.generator == "entropy":
        return np.log(a) + 1.0
    return mmap.power_c * a ** (mmap.power_c - 1.0)


def generator_hess(mmap, a):
    a = np.asarray(a, dtype=np.float64)
    if mmap.generator == "quadratic":
        return np.ones_like(a)
    if mmap.generator == "neglog":
        return 1.0 / (a * a)
    if mmap.generator == "entropy":
        return 1.0 / a
    c = mmap.power_c
    return c * (c - 1.0) * a ** (c - 2.0)


def bregman_div(mmap, a, b):
    """D_phi(A, B): entrywise sum of phi(a) - phi(b) - phi'(b)(a - b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    _check_domain(mmap, a, "A")
    _check_domain(mmap, b, "B")
    if mmap.generator == "quadratic":
        return float(0.5 * np.sum((a - b) ** 2))
    if mmap.generator == "neglog":
        r = a / b
        return float(np.sum(r - np.log(r) - 1.0))
    if mmap.generator == "entropy":
        return float(np.sum(a * np.log(a / b) - a + b))
    c = mmap.power_c
    return float(np.sum(a**c - b**c - c * b ** (c - 1.0) * (a - b)))


def md_update(mmap, a_t, g, gamma, validate=True):
    """One mirror-descent step; see the module table for the closed forms.

    ``validate=False`` skips the Gamma/domain scans for callers that already
    guarantee them (the solver's inner loop).
    """
    a_t = np.asarray(a_t, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if validate:
        if not (a_t.shape == g.shape
                and (gamma.shape == a_t.shape or gamma.shape == ())):
            raise ValueError("A_t, G, Gamma shapes must agree")
        if np.any(gamma <= 0):
            raise ValueError("Gamma must be entrywise positive")
        _check_domain(mmap, a_t, "A_t")
    gamma = np.ascontiguousarray(np.broadcast_to(gamma, a_t.shape))
    k = backend.kernels()
    floor = mmap.domain_floor
    gen = mmap.generator
    if gen == "quadratic":
        return k.update_quadratic(a_t, g, gamma, mmap.constraint == "nonneg_orthant")
    if gen == "entropy":
        if mmap.constraint == "column_simplex":
            return k.update_entropy_simplex(a_t, g, gamma, floor)
        return k.update_entropy(a_t, g, gamma, floor)
    if gen == "neglog":
        ok, out = k.update_neglog(a_t, g, gamma, floor)
        if not ok:
            raise DomainExitError("neglog step denominator went nonpositive")
        return out
    ok, out = k.update_power(a_t, g, gamma, mmap.power_c, floor)
    if not ok:
        raise DomainExitError("power step base went nonpositive")
    return out


def md_update_with_retry(mmap, a_t, g, gamma, max_retries=20):
    """md_update, doubling Gamma (halving the step) on domain exits."""
    scale = 1.0
    for _ in range(max_retries + 1):
        try:
            return md_update(mmap, a_t, g, gamma if scale == 1.0 else gamma * scale)
        except DomainExitError:
            scale *= 2.0
    raise DomainExitError(
        f"step rejected {max_retries} times (phi={mmap.name}); gradient may be non-finite"
    )
