"""Comparison learners: explicit Hedge over all n! permutations, FPL, and the hindsight oracle.

Objects are first-order representations: ``h[i]`` is the rank given to
coordinate ``i`` and the loss of ``h`` under ``l`` is ``h . l``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ValidationError
from .learner import check_loss, eta_for

MAX_BRUTE_FORCE = 8
MAX_EXPLICIT_HEDGE = 7


def best_in_hindsight(L) -> tuple[tuple[int, ...], float]:
    """Rank 1 to the largest cumulative loss, rank n to the smallest (ties: lower index first)."""
    L = np.asarray(L, dtype=float)
    n = len(L)
    order = sorted(range(n), key=lambda i: (-L[i], i))
    h = [0] * n
    for rank, i in enumerate(order, start=1):
        h[i] = rank
    return tuple(h), float(np.dot(h, L))


def brute_force_best(L) -> tuple[tuple[int, ...], float]:
    L = np.asarray(L, dtype=float)
    n = len(L)
    if n > MAX_BRUTE_FORCE:
        raise ValidationError(f"brute force refused for n = {n} > {MAX_BRUTE_FORCE}")
    best_h, best = None, math.inf
    for perm in itertools.permutations(range(1, n + 1)):
        val = float(np.dot(perm, L))
        if val < best:
            best_h, best = perm, val
    return tuple(best_h), best


class ExplicitHedge:
    """Hedge with one weight per permutation.

    Object losses ``h . l`` are divided by ``n(n+1)/2`` so each trial's loss
    lies in [0, 1].
    """

    def __init__(self, n: int, eta: float):
        if n > MAX_EXPLICIT_HEDGE:
            raise ValidationError(f"explicit Hedge refused for n = {n} > {MAX_EXPLICIT_HEDGE}")
        self.n = n
        self.eta = eta
        self.objects = np.array(list(itertools.permutations(range(1, n + 1))), dtype=float)
        self.weights = np.full(len(self.objects), 1.0 / len(self.objects))
        self.scale = n * (n + 1) / 2

    @staticmethod
    def tuned_eta(n: int, loss_guess: float) -> float:
        """F-S tuning with ``ln(n!)`` as divergence bound; ``loss_guess`` in scaled units."""
        return eta_for(max(math.lgamma(n + 1), 1e-12), loss_guess)

    def mean(self) -> np.ndarray:
        return self.weights @ self.objects

    def predict(self, rng: np.random.Generator) -> tuple:
        idx = int(np.searchsorted(np.cumsum(self.weights), rng.random() * self.weights.sum(), side="right"))
        idx = min(idx, len(self.weights) - 1)
        return tuple(int(a) for a in self.objects[idx])

    def update(self, loss) -> None:
        loss = check_loss(loss, self.n)
        scaled = (self.objects @ loss) / self.scale
        w = self.weights * np.exp(-self.eta * scaled)
        self.weights = w / w.sum()


def hedge_explicit_step(hedge: ExplicitHedge, loss, rng: np.random.Generator):
    h = hedge.predict(rng)
    hedge.update(loss)
    return h, hedge.weights


def fpl_predict(L, pert_scale: float, rng: np.random.Generator) -> tuple:
    """Leader on cumulative losses plus i.i.d. uniform [0, pert_scale] perturbations."""
    if pert_scale <= 0:
        raise ValidationError(f"perturbation scale must be positive, got {pert_scale}")
    L = np.asarray(L, dtype=float)
    return best_in_hindsight(L + rng.uniform(0.0, pert_scale, size=len(L)))[0]


def default_fpl_scale(n: int, T: int) -> float:
    return math.sqrt(n * T)
