#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Times each hot kernel at solver-realistic sizes (a 2R-fiber batch) and one
full end-to-end decomposition per backend.

    python benchmarks/bench_kernels.py [--shape 100,100,100] [--rank 10]
"""

import argparse
import timeit

import numpy as np

from smartcpd import backend
from smartcpd.bregman import MirrorMap
from smartcpd.losses import parse_loss
from smartcpd.sampler import SamplerState
from smartcpd.solver import SolverConfig, default_init, smartcpd
from smartcpd.stepsize import parse_schedule
from smartcpd.synthdata import GeneratorSpec, gen_factors, observe
from smartcpd.tensor import extract_fibers, khatri_rao_rows, unfolding_rows


def time_us(fn, number=2000):
    fn()  # warm up
    return timeit.timeit(fn, number=number) / number * 1e6


def bench_kernels(x, truth, rank, name):
    k = backend.kernels()
    mirrors = [MirrorMap("entropy", "nonneg_orthant")] * x.ndim
    model = default_init(x.shape, rank, mirrors, 7)
    state = SamplerState(7)
    fibers = state.sample_fibers(unfolding_rows(x.shape, 1), 2 * rank)
    xhat = extract_fibers(x, 1, fibers)
    hhat = khatri_rao_rows(model, 1, fibers)
    a = model.factors[0]
    g = k.grad_rows(3, 0.0, 1e-9, xhat, hhat, a)
    acc = np.zeros_like(a)
    gamma = k.adagrad_step(acc.copy(), g, 1e-5)
    shape64 = np.asarray(x.shape, dtype=np.int64)
    f0 = fibers - 1
    rows = [
        ("khatri_rao_rows", lambda: k.kr_rows(model.factors, 0, f0)),
        ("dense_fiber_rows", lambda: k.dense_fiber_rows(x.values, shape64, 0, f0)),
        ("grad_rows[gen-kl]", lambda: k.grad_rows(3, 0.0, 1e-9, xhat, hhat, a)),
        ("grad_rows[beta=0.5]", lambda: k.grad_rows(2, 0.5, 1e-9, xhat, hhat, a)),
        ("jensen_gamma[gen-kl]", lambda: k.jensen_gamma(3, 0.0, xhat, hhat, a, 1e-8)),
        ("adagrad_step", lambda: k.adagrad_step(acc, g, 1e-5)),
        ("update_entropy", lambda: k.update_entropy(a, g, gamma, 1e-12)),
        ("update_neglog", lambda: k.update_neglog(a, g, gamma, 1e-12)),
    ]
    out = {}
    for label, fn in rows:
        out[label] = time_us(fn)
    return out


def bench_solver(x, truth, rank):
    cfg = SolverConfig(loss=parse_loss("gen-kl"),
                       mirror=MirrorMap("entropy", "nonneg_orthant"),
                       schedule=parse_schedule("adagrad:b=1e-5"), rank=rank,
                       max_epochs=5, stop_tol=1e-15, seed=7)
    import time

    t0 = time.perf_counter()
    _, trace = smartcpd(x, cfg)
    dt = time.perf_counter() - t0
    return dt / trace[-1].iteration * 1e6


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--shape", default="100,100,100")
    parser.add_argument("--rank", type=int, default=10)
    args = parser.parse_args()
    shape = tuple(int(s) for s in args.shape.split(","))

    spec = GeneratorSpec(shape=shape, rank=args.rank, a_max=0.5, heavy_frac=0.05,
                         observation="poisson", seed=1)
    truth = gen_factors(spec)
    x = observe(truth, spec)

    results = {}
    solver_us = {}
    for name in backend.available_backends():
        backend.set_backend(name)
        results[name] = bench_kernels(x, truth, args.rank, name)
        solver_us[name] = bench_solver(x, truth, args.rank)
    backend.set_backend(backend.available_backends()[0])

    names = sorted(results)
    width = max(len(k) for k in next(iter(results.values())))
    header = f"{'kernel':<{width}} " + " ".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f" {'speedup':>9}"
    print(f"shape={shape} rank={args.rank} (times in us per call)")
    print(header)
    print("-" * len(header))
    for label in next(iter(results.values())):
        cells = [results[n][label] for n in names]
        line = f"{label:<{width}} " + " ".join(f"{c:12.2f}" for c in cells)
        if len(cells) == 2:
            line += f" {cells[names.index('python')] / cells[names.index('c')]:8.2f}x"
        print(line)
    line = f"{'solver us/iteration':<{width}} " \
        + " ".join(f"{solver_us[n]:12.2f}" for n in names)
    if len(names) == 2:
        line += f" {solver_us['python'] / solver_us['c']:8.2f}x"
    print(line)


if __name__ == "__main__":
    main()
