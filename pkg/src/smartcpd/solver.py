"""Block-randomized fiber-sampled stochastic mirror descent for CPD.

Each outer iteration samples a mode n and a batch of mode-n fibers, forms
the sampled gradient from those fibers' unfolding rows and Khatri-Rao
rows, and applies one (or several, on the same fibers) mirror-descent
steps to A_n, leaving the other blocks untouched.  Step-size matrices come
from a scalar schedule, the Adagrad accumulator, or the Jensen
majorization rule; the mixed policy starts with Jensen scalings and hands
over to Adagrad with the quadratic generator once the epoch cost stalls.

A stationarity diagnostic is included for small tensors: the Bregman
distance between the current model and the minimizer of the proximal
envelope  F + h + (1/(2 lambda)) D_phi(., A),  which is zero exactly at
stationary points.  The envelope is minimized by full-batch block mirror
descent with majorization step sizes.
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .bregman import DomainExitError, MirrorMap, bregman_div, generator_hess, md_update
from .gradient import sampled_gradient
from .losses import DomainError, LossSpec, check_domain, loss_hess_m
from .metrics import factor_mse, objective_cost
from .sampler import SamplerState, derived_generator, floyd_sample
from .stepsize import (
    AdagradState,
    ScheduleSpec,
    adagrad_gamma,
    jensen_gamma,
    jensen_generator,
    scalar_eta,
)

FULL_COST_MAX_ENTRIES = 10**7
HELD_OUT_FRACTION = 0.01
MAX_STEP_RETRIES = 20

_log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Run aborted: non-finite cost or an unrecoverable domain exit."""


class IncompatiblePairError(ValueError):
    """The requested (loss, mirror) or (loss, schedule) pair has no rule."""


@dataclass
class SolverConfig:
    loss: LossSpec
    mirror: object  # MirrorMap shared by all modes, or a list per mode
    schedule: ScheduleSpec
    rank: int
    batch_fibers: int = None  # None -> 2R
    inner_iters: int = 1
    max_epochs: int = 10
    stop_tol: float = 1e-3
    seed: int = 0
    eval_every: int = None  # extra trace rows every k iterations
    truth: object = None  # FactorModel; enables the trace MSE column
    mse_target: float = None  # stop once the trace MSE falls below
    track_stationarity: bool = False
    stationarity_lam: float = None  # fixed envelope parameter for the trace
    check_feasibility: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.batch_fibers is not None and self.batch_fibers < 1:
            raise ValueError("batch_fibers must be >= 1")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def mirrors(self, n_modes):
        if isinstance(self.mirror, MirrorMap):
            return [self.mirror] * n_modes
        mirrors = list(self.mirror)
        if len(mirrors) != n_modes:
            raise ValueError(f"got {len(mirrors)} mirror maps for {n_modes} modes")
        return mirrors


@dataclass
class TraceRecord:
    iteration: int
    samples: int  # cumulative tensor entries consumed
    seconds: float
    cost: float
    mse: float = None
    stationarity: float = None


def validate_pair(loss, mirror):
    """Reject (loss, mirror) pairs with no sound update rule."""
    if loss.m_domain == "all-reals" and loss.kind != "euclidean":
        if mirror.generator != "quadratic":
            raise IncompatiblePairError(
                f"loss {loss.name!r} works on all-real model entries and pairs "
                f"with the quadratic mirror only, not {mirror.name!r}"
            )
    if loss.m_domain == "nonnegative" and mirror.generator == "quadratic" \
            and mirror.constraint == "unconstrained":
        raise IncompatiblePairError(
            f"loss {loss.name!r} needs nonnegative model entries; use the "
            f"nonneg_orthant constraint with the quadratic mirror"
        )


def _validate_jensen_mirror(loss, mirrors):
    gen, c = jensen_generator(loss)
    for n, mmap in enumerate(mirrors, start=1):
        if mmap.constraint == "column_simplex":
            raise IncompatiblePairError(
                "Jensen scalings are not column-uniform; the simplex update "
                "needs a scalar or adagrad schedule"
            )
        if mmap.generator != gen or (gen == "power" and mmap.power_c != c):
            want = gen if c is None else f"power:{c:g}"
            raise IncompatiblePairError(
                f"Jensen schedule for loss {loss.name!r} pairs with mirror "
                f"{want!r}, but mode {n} uses {mmap.name!r}"
            )


def default_init(shape, rank, mirrors, seed):
    """Random start: uniform (0.1, 1.1) inside strictly positive domains,
    uniform (0, 1) otherwise, column-normalized under the simplex."""
    rng = derived_generator(seed, 2)
    factors = []
    for size, mmap in zip(shape, mirrors):
        if mmap.constraint == "column_simplex":
            a = rng.uniform(0.0, 1.0, size=(size, rank))
            a /= a.sum(axis=0, keepdims=True)
        elif mmap.positive_domain:
            a = rng.uniform(0.1, 1.1, size=(size, rank))
        else:
            a = rng.uniform(0.0, 1.0, size=(size, rank))
        factors.append(a)
    return tz.FactorModel(factors)


def _check_init(model, mirrors):
    for n, (a, mmap) in enumerate(zip(model.factors, mirrors), start=1):
        if mmap.positive_domain and np.any(a <= 0):
            raise ValueError(f"mode-{n} init has nonpositive entries but "
                             f"phi={mmap.generator} needs a positive domain")
        if mmap.constraint == "nonneg_orthant" and np.any(a < 0):
            raise ValueError(f"mode-{n} init leaves the nonnegative orthant")
        if mmap.constraint == "column_simplex":
            sums = a.sum(axis=0)
            if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(a < 0):
                raise ValueError(f"mode-{n} init is not column-stochastic")


def _assert_feasible(a, mmap, where):
    if mmap.constraint == "column_simplex":
        sums = a.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > 1e-12) or np.any(a < 0):
            raise SolverError(f"simplex constraint violated {where}")
    elif mmap.positive_domain:
        if np.any(a < mmap.domain_floor):
            raise SolverError(f"positive-domain floor violated {where}")
    elif mmap.constraint == "nonneg_orthant":
        if np.any(a < 0):
            raise SolverError(f"nonnegativity violated {where}")


class _CostTracker:
    """Held-out fiber estimate every row; full cost at epoch ends when cheap."""

    def __init__(self, tensor, loss, seed):
        self.tensor = tensor
        self.loss = loss
        j1 = tz.unfolding_rows(tensor.shape, 1)
        k = min(j1, max(1, round(HELD_OUT_FRACTION * j1)))
        self.held_out = floyd_sample(derived_generator(seed, 1), j1, k)
        self.full_ok = tensor.size <= FULL_COST_MAX_ENTRIES

    def estimate(self, model):
        return objective_cost(self.tensor, model, self.loss,
                              subsample=(1, self.held_out))

    def epoch_cost(self, model):
        if self.full_ok:
            return objective_cost(self.tensor, model, self.loss)
        return self.estimate(model)


def smartcpd(tensor, config, init=None, on_record=None):
    """Run the decomposition; returns (final model, trace records).

    ``on_record`` is called with every TraceRecord as it is produced, so
    callers can stream the trace to disk.
    """
    n_modes = tensor.ndim
    shape = tensor.shape
    loss = config.loss
    mirrors = config.mirrors(n_modes)
    for mmap in mirrors:
        validate_pair(loss, mmap)
    schedule = config.schedule
    if schedule.kind in ("jensen", "mixed"):
        _validate_jensen_mirror(loss, mirrors)

    if init is None:
        init = default_init(shape, config.rank, mirrors, config.seed)
    if init.shape != shape:
        raise ValueError(f"init shape {init.shape} != tensor shape {shape}")
    if init.rank != config.rank:
        raise ValueError(f"init rank {init.rank} != configured rank {config.rank}")
    _check_init(init, mirrors)
    check_domain(loss, x=tensor.vals if isinstance(tensor, tz.CooTensor) else tensor.values)

    model = init.copy()
    trace = []
    tracker = _CostTracker(tensor, loss, config.seed)
    t0 = time.perf_counter()

    def record(iteration, samples, cost, stationarity=None):
        mse = factor_mse(model, config.truth) if config.truth is not None else None
        if config.track_stationarity and stationarity is None:
            stationarity = stationarity_measure(model, tensor, config,
                                                lam=config.stationarity_lam)
        rec = TraceRecord(iteration, samples, time.perf_counter() - t0,
                          float(cost), mse, stationarity)
        trace.append(rec)
        if on_record is not None:
            on_record(rec)
        return rec

    first = record(0, 0, tracker.epoch_cost(model))
    if not math.isfinite(first.cost):
        raise SolverError("non-finite cost at the initial point")
    if config.max_epochs == 0:
        return model, trace

    sampler = SamplerState(config.seed)
    batch = config.batch_fibers if config.batch_fibers is not None else 2 * config.rank
    j_rows = [tz.unfolding_rows(shape, n) for n in range(1, n_modes + 1)]

    adastate = None
    if schedule.kind == "adagrad":
        adastate = AdagradState([a.shape for a in model.factors], b=schedule.b)
    entries = tensor.size
    consumed = 0
    epoch = 0
    prev_cost = trace[0].cost
    phase = "jensen" if schedule.kind == "mixed" else schedule.kind
    iteration = 0

    while epoch < config.max_epochs:
        n = sampler.sample_block(n_modes)
        b_n = min(batch, j_rows[n - 1])
        fibers = sampler.sample_fibers(j_rows[n - 1], b_n)
        try:
            xhat = tz.extract_fibers(tensor, n, fibers)
            hhat = tz.khatri_rao_rows(model, n, fibers)
            a_n = model.factors[n - 1]
            mmap = mirrors[n - 1]
            needs_check = loss.m_domain == "nonnegative" and not mmap.positive_domain
            for _ in range(config.inner_iters):
                g = sampled_gradient(loss, xhat, hhat, a_n, validate=needs_check)
                if phase in ("constant", "sqrt_horizon", "diminishing"):
                    gamma = np.float64(1.0 / scalar_eta(schedule, iteration))
                elif phase == "adagrad":
                    gamma = adagrad_gamma(adastate, n, g)
                else:  # jensen
                    gamma = jensen_gamma(loss, xhat, hhat, a_n)
                a_n = _step_with_retry(mmap, a_n, g, gamma)
            model.factors[n - 1] = a_n
        except (DomainError, DomainExitError) as exc:
            raise SolverError(
                f"iteration {iteration}, mode {n}: {exc}"
            ) from exc
        if config.check_feasibility:
            _assert_feasible(a_n, mirrors[n - 1], f"at iteration {iteration}, mode {n}")

        iteration += 1
        consumed += int(b_n) * shape[n - 1]
        if config.eval_every and iteration % config.eval_every == 0 \
                and consumed < (epoch + 1) * entries:
            rec = record(iteration, consumed, tracker.estimate(model))
            if not math.isfinite(rec.cost):
                raise SolverError(f"non-finite cost at iteration {iteration}")
            if _hit_mse_target(config, rec):
                return model, trace

        while consumed >= (epoch + 1) * entries:
            epoch += 1
            cost = tracker.epoch_cost(model)
            rec = record(iteration, consumed, cost)
            if not math.isfinite(cost):
                raise SolverError(f"non-finite cost at epoch {epoch}")
            if _hit_mse_target(config, rec):
                return model, trace
            rel = abs(cost - prev_cost) / max(1.0, abs(prev_cost))
            if schedule.kind == "mixed" and phase == "jensen" and rel < schedule.switch_tol:
                phase = "adagrad"
                mirrors = [_quadratic_twin(m) for m in mirrors]
                adastate = AdagradState([a.shape for a in model.factors], b=schedule.b)
                _log.info("mixed schedule: switching to adagrad at epoch %d", epoch)
            elif rel < config.stop_tol:
                return model, trace
            prev_cost = cost

    return model, trace


def _hit_mse_target(config, rec):
    return (config.mse_target is not None and rec.mse is not None
            and rec.mse <= config.mse_target)


def _quadratic_twin(mmap):
    constraint = "unconstrained" if mmap.constraint == "unconstrained" else "nonneg_orthant"
    return MirrorMap("quadratic", constraint)


def _step_with_retry(mmap, a, g, gamma):
    scale = 1.0
    for _ in range(MAX_STEP_RETRIES + 1):
        try:
            return md_update(mmap, a, g, gamma * scale if scale != 1.0 else gamma,
                             validate=False)
        except DomainExitError:
            scale *= 2.0
    raise DomainExitError(f"step rejected {MAX_STEP_RETRIES} times (phi={mmap.name})")


# ---------------------------------------------------------------------------
# Stationarity diagnostic
# ---------------------------------------------------------------------------


def curvature_bound(model, tensor, loss, mirrors, seed=0, probes=100):
    """Sampled bound on the loss curvature relative to the generators.

    Max over random entries of |l''(x, m)| * ||h||^2 / phi''(a), which
    scales the admissible envelope parameter lambda.
    """
    if isinstance(tensor, tz.CooTensor):
        tensor = tensor.to_dense()
    rng = derived_generator(seed, 4)
    shape = tensor.shape
    worst = 0.0
    for _ in range(probes):
        idx = tuple(int(rng.integers(1, s + 1)) for s in shape)
        n = int(rng.integers(1, len(shape) + 1))
        h = np.ones(model.rank)
        for m_mode, a in enumerate(model.factors, start=1):
            if m_mode != n:
                h = h * a[idx[m_mode - 1] - 1, :]
        row = model.factors[n - 1][idx[n - 1] - 1, :]
        m_val = float(h @ row)
        x_val = tensor[idx]
        hess = abs(float(loss_hess_m(loss, x_val, max(m_val, 0.0)
                                     if loss.m_domain == "nonnegative" else m_val,
                                     validate=False)))
        phi2 = float(np.min(generator_hess(mirrors[n - 1], np.maximum(row, 1e-12))))
        worst = max(worst, hess * float(h @ h) / phi2)
    return max(worst, 1e-6)


def _envelope_block_step(mmap, a, g, gamma, rho, ref):
    """Exact minimizer of <g, A> + sum Gamma D(A, a) + rho D(A, ref)."""
    floor = mmap.domain_floor
    scale = 1.0
    for _ in range(60):
        gam = gamma * scale
        if mmap.generator == "entropy":
            logit = (gam * np.log(a) + rho * np.log(ref) - g) / (gam + rho)
            out = np.maximum(np.exp(logit), floor)
            if mmap.constraint == "column_simplex":
                out /= out.sum(axis=0, keepdims=True)
            return out
        if mmap.generator == "neglog":
            denom = gam / a + rho / ref + g
            if np.min(denom) <= 0:
                scale *= 2.0
                continue
            return np.maximum((gam + rho) / denom, floor)
        if mmap.generator == "quadratic":
            out = (gam * a + rho * ref - g) / (gam + rho)
            if mmap.constraint == "nonneg_orthant":
                np.maximum(out, 0.0, out=out)
            return out
        c = mmap.power_c
        base = (gam * a ** (c - 1.0) + rho * ref ** (c - 1.0) - g / c) / (gam + rho)
        if np.min(base) <= 0:
            scale *= 2.0
            continue
        return np.maximum(base ** (1.0 / (c - 1.0)), floor)
    raise SolverError("envelope block step kept leaving the domain")


def stationarity_measure(model, tensor, config, lam=None, inner_tol=1e-9,
                         max_sweeps=5000):
    """D_phi between ``model`` and the envelope minimizer anchored at it.

    Zero exactly at stationary points of the constrained problem.  Solved
    by full-batch block mirror descent with majorization step sizes plus
    the envelope's own anchor term; intended for diagnostic-size tensors.
    """
    loss = config.loss
    n_modes = tensor.ndim
    mirrors = config.mirrors(n_modes)
    jensen_generator(loss)  # diagnostic needs a majorization rule
    if lam is None:
        lam = 0.25 / curvature_bound(model, tensor, loss, mirrors, seed=config.seed)
    rho = 1.0 / (2.0 * lam)
    unfoldings = [tz.full_unfolding(tensor, n) for n in range(1, n_modes + 1)]
    current = model.copy()
    ref = model

    for _ in range(max_sweeps):
        delta = 0.0
        for n in range(1, n_modes + 1):
            hhat = tz.khatri_rao_rows(current, n, np.arange(1, unfoldings[n - 1].shape[0] + 1))
            a = current.factors[n - 1]
            g = sampled_gradient(loss, unfoldings[n - 1], hhat, a, validate=False)
            mmap = mirrors[n - 1]
            gamma = jensen_gamma(loss, unfoldings[n - 1], hhat, a)
            if mmap.constraint == "column_simplex":
                gamma = np.broadcast_to(gamma.max(axis=0, keepdims=True), gamma.shape)
            new = _envelope_block_step(mmap, a, g, gamma, rho, ref.factors[n - 1])
            delta = max(delta, float(np.max(np.abs(new - a))))
            current.factors[n - 1] = new
        if delta <= inner_tol:
            break
    else:
        raise SolverError(
            f"envelope solve did not reach {inner_tol:g} in {max_sweeps} sweeps "
            f"(last change {delta:g})"
        )
    return float(sum(bregman_div(mmap, new, old) for mmap, new, old
                     in zip(mirrors, current.factors, ref.factors)))
