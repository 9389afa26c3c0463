"""Invariant checks at a chosen size, used by ``xfhedge verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import baselines, bregman, learner
from .formulation import AugmentedPoint, build, constraints, infinity_bound, random_corner
from .sorting_networks import MAX_EXHAUSTIVE_WIRES, build_network, reflection_sequence, verify_zero_one


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def run_checks(n: int, seed: int = 0, samples: int = 20_000) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for kind in ("bubble", "batcher"):
        if n <= MAX_EXHAUSTIVE_WIRES:
            out.append(Check(f"zero_one[{kind}]", verify_zero_one(build_network(kind, n))))

    ext = build(reflection_sequence("batcher", n))
    csts = constraints(ext)
    U = infinity_bound(ext)
    worst = 0.0
    perms_ok = True
    corners = [random_corner(ext, rng) for _ in range(100)]
    for h, w in corners:
        worst = max(worst, max(abs(c.residual(w)) for c in csts))
        perms_ok &= sorted(h) == list(range(1, n + 1))
        perms_ok &= float(np.max(w.data)) <= U
    out.append(Check("corner_feasibility", worst == 0.0 and perms_ok, f"max residual {worst:g}"))

    tol = 1e-8
    start = AugmentedPoint(rng.uniform(0.0, 2.0 * n, ext.dim), n, ext.m)
    proj, rep = bregman.project(start, csts, tol=tol)
    total = float(proj.v.sum())
    out.append(
        Check(
            "projection",
            rep.converged and abs(total - n * (n + 1) / 2) <= 1e-6,
            f"{rep.cycles} cycles, residual {rep.max_residual:.2e}",
        )
    )
    pyth = max(bregman.divergence(w, proj) - bregman.divergence(w, start) for _, w in corners[:20])
    out.append(Check("pythagorean", pyth <= 1e-6, f"max excess {pyth:.2e}"))

    state = learner.init(ext, tol=tol)
    D = learner.divergence_bound(n, ext.m, U)
    worst = max(bregman.divergence(w, state.w) for _, w in corners)
    out.append(Check("init_divergence", worst <= D + 1e-6, f"max {worst:.3f} <= {D:g}"))

    draws = learner.sample_many(ext, proj, samples, rng)
    err = float(np.max(np.abs(draws.mean(axis=0) - proj.v)))
    valid = bool(np.all(np.sort(draws, axis=1) == np.arange(1, n + 1)))
    slack = 5 * n / math.sqrt(samples)
    out.append(Check("sampler_mean", valid and err <= slack, f"L_inf {err:.4f} <= {slack:.4f}"))

    if n <= baselines.MAX_BRUTE_FORCE:
        agree = True
        for _ in range(20):
            L = rng.random(n) * 10
            agree &= math.isclose(baselines.best_in_hindsight(L)[1], baselines.brute_force_best(L)[1], abs_tol=1e-9)
        out.append(Check("oracle_equivalence", agree))
    return out
