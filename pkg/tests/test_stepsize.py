"""Step-size machinery: Adagrad, Jensen majorization scalings, schedules."""

import math

import numpy as np
import pytest

from smartcpd.bregman import MirrorMap, md_update
from smartcpd.gradient import sampled_gradient, sampled_objective
from smartcpd.losses import DomainError, LossSpec
from smartcpd.stepsize import (
    AdagradState,
    ScheduleSpec,
    adagrad_gamma,
    jensen_gamma,
    jensen_generator,
    parse_schedule,
    scalar_eta,
)

JENSEN_LOSSES = [
    LossSpec("euclidean"),
    LossSpec("is_div"),
    LossSpec("gen_kl"),
    LossSpec("bernoulli_odds"),
    LossSpec("beta_div", beta=2.5),
    LossSpec("beta_div", beta=3.0),
    LossSpec("beta_div", beta=0.5),
    LossSpec("beta_div", beta=-0.5),
]


def mirror_for(loss):
    gen, c = jensen_generator(loss)
    if gen == "power":
        return MirrorMap("power", "nonneg_orthant", power_c=c)
    return MirrorMap(gen, "nonneg_orthant")


def scalar_bregman(mmap, a, b):
    if mmap.generator == "quadratic":
        return 0.5 * (a - b) ** 2
    if mmap.generator == "neglog":
        return a / b - np.log(a / b) - 1.0
    if mmap.generator == "entropy":
        return a * np.log(a / b) - a + b
    c = mmap.power_c
    return a**c - b**c - c * b ** (c - 1.0) * (a - b)


class TestAdagrad:
    def test_first_call_with_zero_gradient_is_sqrt_b(self):
        state = AdagradState([(2, 2)], b=1e-5)
        gamma = adagrad_gamma(state, 1, np.zeros((2, 2)))
        np.testing.assert_allclose(gamma, math.sqrt(1e-5), rtol=1e-12)

    def test_current_gradient_enters_accumulator(self):
        state = AdagradState([(1, 1)], b=1e-5)
        gamma = adagrad_gamma(state, 1, np.array([[3.0]]))
        assert gamma[0, 0] == pytest.approx(math.sqrt(9.0 + 1e-5), rel=1e-12)
        gamma2 = adagrad_gamma(state, 1, np.array([[4.0]]))
        assert gamma2[0, 0] == pytest.approx(math.sqrt(25.0 + 1e-5), rel=1e-12)

    def test_zero_gradients_keep_sqrt_b(self):
        state = AdagradState([(3, 2)], b=1e-4)
        for _ in range(10):
            gamma = adagrad_gamma(state, 1, np.zeros((3, 2)))
        np.testing.assert_allclose(gamma, 1e-2, rtol=1e-12)

    def test_step_ratio_bounded_by_one(self, rng):
        state = AdagradState([(4, 3)], b=1e-12)
        for _ in range(20):
            g = rng.normal(scale=rng.uniform(0.01, 10.0), size=(4, 3))
            gamma = adagrad_gamma(state, 1, g)
            assert np.all(np.abs(g) / gamma <= 1.0 + 1e-12)

    def test_monotone_nondecreasing(self, rng, kernel_backend):
        state = AdagradState([(3, 3)], b=1e-6)
        prev = np.zeros((3, 3))
        for _ in range(50):
            gamma = adagrad_gamma(state, 1, rng.normal(size=(3, 3)))
            assert np.all(gamma >= prev)
            prev = gamma

    def test_shape_mismatch(self):
        state = AdagradState([(2, 2)], b=1.0)
        with pytest.raises(ValueError, match="shape"):
            adagrad_gamma(state, 1, np.zeros((3, 2)))

    def test_per_mode_accumulators_independent(self, rng):
        state = AdagradState([(2, 2), (2, 2)], b=1e-6)
        adagrad_gamma(state, 1, np.full((2, 2), 5.0))
        gamma2 = adagrad_gamma(state, 2, np.zeros((2, 2)))
        np.testing.assert_allclose(gamma2, 1e-3, rtol=1e-12)


class TestScalarSchedules:
    def test_constant(self):
        spec = ScheduleSpec("constant", eta=0.1)
        assert scalar_eta(spec, 0) == 0.1
        assert scalar_eta(spec, 12345) == 0.1

    def test_sqrt_horizon(self):
        spec = ScheduleSpec("sqrt_horizon", horizon=100)
        assert scalar_eta(spec, 3) == pytest.approx(0.1)

    def test_diminishing(self):
        spec = ScheduleSpec("diminishing", eta0=1.0, alpha=0.6)
        assert scalar_eta(spec, 0) == 1.0
        assert scalar_eta(spec, 99) == pytest.approx(100.0 ** -0.6, rel=1e-12)

    def test_diminishing_alpha_range(self):
        with pytest.raises(ValueError):
            ScheduleSpec("diminishing", alpha=0.5)
        with pytest.raises(ValueError):
            ScheduleSpec("diminishing", alpha=1.2)
        ScheduleSpec("diminishing", alpha=1.0)

    def test_diminishing_sum_diverges_square_sum_converges(self):
        spec = ScheduleSpec("diminishing", eta0=1.0, alpha=0.6)
        t = np.arange(10**6, dtype=np.float64)
        eta = spec.eta0 / (1.0 + t) ** spec.alpha
        checkpoints = [10**k for k in range(2, 7)]
        sums = {n: (eta[:n].sum(), (eta[:n] ** 2).sum()) for n in checkpoints}
        for prev, cur in zip(checkpoints, checkpoints[1:]):
            inc = sums[cur][0] - sums[prev][0]
            inc_sq = sums[cur][1] - sums[prev][1]
            prev_inc = sums[prev][0] - (sums[prev // 10][0] if prev // 10 in sums else 0.0)
            prev_inc_sq = sums[prev][1] - (sums[prev // 10][1] if prev // 10 in sums else 0.0)
            # per-decade increments grow for the sum (divergence) and
            # shrink geometrically for the squared sum (convergence)
            assert inc > prev_inc
            assert inc_sq < 0.75 * prev_inc_sq

    def test_parse_schedules(self):
        assert parse_schedule("adagrad:b=1e-5").b == 1e-5
        assert parse_schedule("constant:0.1").eta == 0.1
        assert parse_schedule("sqrt:T=400").horizon == 400
        d = parse_schedule("diminishing:eta0=2,alpha=0.7")
        assert d.eta0 == 2.0 and d.alpha == 0.7
        assert parse_schedule("jensen").kind == "jensen"
        m = parse_schedule("mixed:switch_tol=1e-3")
        assert m.switch_tol == 1e-3 and m.b == 1e-5
        assert parse_schedule("mixed").switch_tol == 1e-4
        with pytest.raises(ValueError):
            parse_schedule("adam")


class TestJensenGamma:
    def test_kl_hand_case(self):
        gamma = jensen_gamma(LossSpec("gen_kl"), np.array([[2.0]]),
                             np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(gamma, [[1.0, 1.0]], rtol=1e-12)

    def test_euclidean_hand_case(self):
        # curvature scaling h_r (h^T abar) / abar_r with no extra 1/2:
        # the halved variant fails the majorization property below
        gamma = jensen_gamma(LossSpec("euclidean"), np.array([[2.0]]),
                             np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(gamma, [[2.0, 2.0]], rtol=1e-12)

    def test_kl_collapses_when_model_fits(self, rng):
        loss = LossSpec("gen_kl")
        hhat = rng.uniform(0.5, 1.5, size=(4, 2))
        a_t = rng.uniform(0.5, 1.5, size=(3, 2))
        xhat = hhat @ a_t.T
        gamma = jensen_gamma(loss, xhat, hhat, a_t)
        want = a_t * hhat.sum(axis=0) / (4 * 3)
        np.testing.assert_allclose(gamma, want, rtol=1e-12)

    def test_floor_applies(self):
        gamma = jensen_gamma(LossSpec("gen_kl"), np.array([[0.0]]),
                             np.array([[1.0]]), np.array([[1.0]]))
        np.testing.assert_allclose(gamma, [[1e-8]])

    def test_nonpositive_model_rows_raise(self):
        with pytest.raises(DomainError):
            jensen_gamma(LossSpec("gen_kl"), np.array([[1.0]]),
                         np.array([[1.0]]), np.array([[0.0]]))

    def test_unsupported_losses_raise(self):
        with pytest.raises(ValueError, match="no Jensen"):
            jensen_gamma(LossSpec("logistic"), np.ones((1, 1)), np.ones((1, 1)),
                         np.ones((1, 1)))
        with pytest.raises(ValueError, match="adagrad"):
            jensen_generator(LossSpec("beta_div", beta=1.5))

    def test_generator_pairings(self):
        assert jensen_generator(LossSpec("euclidean")) == ("quadratic", None)
        assert jensen_generator(LossSpec("is_div")) == ("power", -1.0)
        assert jensen_generator(LossSpec("gen_kl")) == ("neglog", None)
        assert jensen_generator(LossSpec("beta_div", beta=3.0)) == ("power", 3.0)
        assert jensen_generator(LossSpec("beta_div", beta=0.5)) == ("power", -0.5)


def random_tuple(loss, rng, rank):
    x = float(rng.uniform(0.1, 5.0))
    if loss.kind == "bernoulli_odds":
        x = float(rng.integers(0, 2))
    h = rng.uniform(0.1, 2.0, size=rank)
    abar = rng.uniform(0.1, 3.0, size=rank)
    a = rng.uniform(0.05, 4.0, size=rank)
    return x, h, a, abar


@pytest.mark.parametrize("loss", JENSEN_LOSSES, ids=lambda l: l.name)
def test_majorization_property(loss, rng):
    """Linearized loss plus Gamma-weighted Bregman terms upper-bounds the
    loss, with equality at the anchor."""
    from smartcpd.losses import loss_grad_m, loss_value

    mmap = mirror_for(loss)
    for _ in range(300):
        rank = int(rng.integers(1, 5))
        x, h, a, abar = random_tuple(loss, rng, rank)
        gamma = jensen_gamma(loss, np.array([[x]]), h[None, :], abar[None, :])[0]
        mbar = float(h @ abar)
        base = loss_value(loss, x, mbar, validate=False)
        grad = loss_grad_m(loss, x, mbar, validate=False) * h
        surrogate = base + float(grad @ (a - abar)) \
            + float(np.sum(gamma * scalar_bregman(mmap, a, abar)))
        actual = loss_value(loss, x, float(h @ a), validate=False)
        scale = max(1.0, abs(actual))
        assert surrogate >= actual - 1e-9 * scale
        # equality at the anchor
        at_anchor = base + float(np.sum(gamma * scalar_bregman(mmap, abar, abar)))
        assert abs(at_anchor - base) <= 1e-10


@pytest.mark.parametrize("loss", JENSEN_LOSSES, ids=lambda l: l.name)
def test_monotone_surrogate_descent(loss, rng):
    """One Jensen-scaled mirror step never increases the sampled cost."""
    mmap = mirror_for(loss)
    for _ in range(100):
        hhat = rng.uniform(0.1, 1.5, size=(4, 3))
        a_t = rng.uniform(0.2, 2.0, size=(6, 3))
        if loss.kind == "bernoulli_odds":
            xhat = rng.integers(0, 2, size=(4, 6)).astype(float)
        else:
            xhat = hhat @ a_t.T * rng.uniform(0.3, 1.8, size=(4, 6))
        before = sampled_objective(loss, xhat, hhat, a_t)
        g = sampled_gradient(loss, xhat, hhat, a_t)
        gamma = jensen_gamma(loss, xhat, hhat, a_t)
        a_next = md_update(mmap, a_t, g, gamma)
        after = sampled_objective(loss, xhat, hhat, a_next)
        assert after <= before + 1e-12 * max(1.0, abs(before))
