"""Majorizer-vs-loss surfaces over a 2-D slice of one factor row.

For the count loss l(x, m) = m - x log(m + eps) with m = h^T a, a in R^2,
this evaluates, for each supported generator phi, the local upper bound

    l(x, h^T abar) + <grad l, a - abar> + sum_r Gamma_r D_phi(a_r, abar_r)

on a rectangular grid of (a_1, a_2).  Gamma_r starts from the convex-part
curvature scaling x * h_r abar_r / (h^T abar), which majorizes globally
for phi = -log a; for the entropy and quadratic generators no grid-free
scaling exists, so Gamma_r is inflated by the curvature ratio at the grid's
lower edge (1/a_lo and 1/a_lo^2 respectively), which is exactly enough on
the grid box.  The bound touches the loss at the anchor.
"""

import numpy as np

from .bregman import MirrorMap
from .losses import LossSpec, loss_grad_m, loss_value

GRID_PHIS = ("quadratic", "neglog", "entropy")


def surrogate_grid_rows(x=3.0, h=(1.0, 1.0), anchor=(5.0, 5.0),
                        grid_min=0.5, grid_max=10.0, grid_points=20,
                        epsilon=1e-9):
    """Rows (phi, a1, a2, loss, surrogate) over the grid, per generator."""
    h = np.asarray(h, dtype=np.float64)
    anchor = np.asarray(anchor, dtype=np.float64)
    if h.shape != (2,) or anchor.shape != (2,):
        raise ValueError("h and anchor must be length-2")
    if grid_min <= 0 or grid_max <= grid_min:
        raise ValueError("grid bounds must satisfy 0 < grid_min < grid_max")
    loss = LossSpec("gen_kl", epsilon=epsilon)
    axis = np.linspace(grid_min, grid_max, grid_points)
    m_bar = float(h @ anchor)
    loss_bar = loss_value(loss, x, m_bar)
    grad_bar = loss_grad_m(loss, x, m_bar) * h  # d l / d a at the anchor
    lam = h * anchor / m_bar
    base_gamma = x * lam
    rows = []
    for phi in GRID_PHIS:
        if phi == "neglog":
            gamma = base_gamma
        elif phi == "entropy":
            gamma = base_gamma / grid_min
        else:
            gamma = base_gamma / grid_min**2
        mmap = MirrorMap(phi, "nonneg_orthant")
        for a1 in axis:
            for a2 in axis:
                a = np.array([a1, a2])
                lval = loss_value(loss, x, float(h @ a))
                div = _scalar_bregman(mmap, a, anchor)
                sur = loss_bar + float(grad_bar @ (a - anchor)) + float(gamma @ div)
                rows.append((phi, float(a1), float(a2), float(lval), float(sur)))
    return rows


def _scalar_bregman(mmap, a, b):
    """Per-coordinate Bregman distances (no entrywise sum)."""
    if mmap.generator == "quadratic":
        return 0.5 * (a - b) ** 2
    if mmap.generator == "neglog":
        r = a / b
        return r - np.log(r) - 1.0
    return a * np.log(a / b) - a + b
