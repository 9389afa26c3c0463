"""XF-Hedge: predict by sampling, update v multiplicatively, project back."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bregman import MAX_CYCLES, ConstraintSet, ProjectionReport, project
from .errors import ProjectionError, ValidationError
from .formulation import AugmentedPoint, ExtendedFormulation, constraints, infinity_bound

FLAT_TOLERANCE = 1e-9


def check_loss(loss, n: int) -> np.ndarray:
    loss = np.asarray(loss, dtype=float)
    if loss.shape != (n,):
        raise ValidationError(f"loss vector must have length {n}, got shape {loss.shape}")
    if not np.all(np.isfinite(loss)) or np.any(loss < 0) or np.any(loss > 1):
        raise ValidationError(f"loss entries must lie in [0, 1], got {loss.tolist()}")
    return loss


@dataclass
class LearnerState:
    ext: ExtendedFormulation
    w: AugmentedPoint
    eta: float
    tol: float
    trial: int = 0
    csts: ConstraintSet | None = None
    max_cycles: int = MAX_CYCLES

    def __post_init__(self):
        if self.csts is None:
            self.csts = ConstraintSet(constraints(self.ext))


@dataclass
class StepRecord:
    trial: int
    prediction: tuple
    sampled_loss: float
    expected_loss: float
    report: ProjectionReport


def _project_or_fail(w, csts, tol, max_cycles, where) -> tuple[AugmentedPoint, ProjectionReport]:
    out, report = project(w, csts, tol=tol, max_cycles=max_cycles)
    if not report.converged:
        raise ProjectionError(
            f"{where}: projection stopped after {report.cycles} cycles with residual "
            f"{report.max_residual:.3e} > tol {tol:.3e}",
            report,
        )
    return out, report


def init(
    ext: ExtendedFormulation,
    U: float | None = None,
    eta: float = 1.0,
    tol: float = FLAT_TOLERANCE,
    max_cycles: int = MAX_CYCLES,
) -> LearnerState:
    """Start from the projection of ``U * 1`` onto the polytope.

    ``U`` defaults to :func:`infinity_bound`; any larger value is also valid.
    """
    bound = infinity_bound(ext)
    if U is None:
        U = bound
    if U < bound:
        raise ValidationError(f"U = {U} is below the corner max-norm bound {bound}")
    if eta < 0:
        raise ValidationError(f"eta must be >= 0, got {eta}")
    csts = ConstraintSet(constraints(ext))
    start = AugmentedPoint(np.full(ext.dim, float(U)), ext.n, ext.m)
    w0, _ = _project_or_fail(start, csts, tol, max_cycles, "initialization")
    return LearnerState(ext=ext, w=w0, eta=eta, tol=tol, csts=csts, max_cycles=max_cycles)


def mult_update(w: AugmentedPoint, loss, eta: float) -> AugmentedPoint:
    loss = check_loss(loss, w.n)
    out = w.copy()
    out.data[: w.n] *= np.exp(-eta * loss)
    return out


def swap_probabilities(w: AugmentedPoint) -> np.ndarray:
    x, s = w.x, w.s
    total = x + s
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where((x > 0) & (total > 0), x / total, 0.0)
    return np.clip(p, 0.0, 1.0)


def sample(ext: ExtendedFormulation, w: AugmentedPoint, rng: np.random.Generator) -> tuple:
    """Feed the canonical object through the reflections, swapping comparator k w.p. x_k/(x_k+s_k)."""
    h = list(ext.c)
    x, s = w.x, w.s
    for k, (i, j) in enumerate(ext.columns):
        xk = x[k]
        if xk <= 0:
            continue
        if rng.random() < xk / (xk + s[k]):
            h[i - 1], h[j - 1] = h[j - 1], h[i - 1]
    return tuple(h)


def sample_many(ext: ExtendedFormulation, w: AugmentedPoint, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized ``sample``: one row per draw, each an independent run of the comparator coin flips."""
    p = swap_probabilities(w)
    out = np.tile(np.asarray(ext.c, dtype=float), (size, 1))
    flips = rng.random((size, ext.m)) < p
    for k, (i, j) in enumerate(ext.columns):
        rows = flips[:, k]
        if not rows.any():
            continue
        a, b = i - 1, j - 1
        tmp = out[rows, a].copy()
        out[rows, a] = out[rows, b]
        out[rows, b] = tmp
    return out


def step(state: LearnerState, loss, rng: np.random.Generator, prediction: tuple | None = None):
    """One trial: predict, charge the loss, update, project.

    Pass ``prediction`` when the object was already sampled (the harness
    samples before the loss is revealed). Returns ``(new_state, StepRecord)``.
    """
    loss = check_loss(loss, state.ext.n)
    if prediction is None:
        prediction = sample(state.ext, state.w, rng)
    sampled_loss = float(np.dot(prediction, loss))
    expected_loss = float(np.dot(state.w.v, loss))
    w_tilde = mult_update(state.w, loss, state.eta)
    w_next, report = _project_or_fail(
        w_tilde, state.csts, state.tol, state.max_cycles, f"trial {state.trial + 1}"
    )
    new_state = replace(state, w=w_next, trial=state.trial + 1)
    return new_state, StepRecord(state.trial + 1, tuple(prediction), sampled_loss, expected_loss, report)


def eta_for(div_bound: float, loss_guess: float) -> float:
    """Freund-Schapire tuning with the divergence bound standing in for ``ln N``.

    The loss guess is clamped from below by ``div_bound``.
    """
    if div_bound <= 0:
        raise ValidationError(f"divergence bound must be positive, got {div_bound}")
    if loss_guess < 0:
        raise ValidationError(f"loss guess must be >= 0, got {loss_guess}")
    guess = max(loss_guess, div_bound)
    return math.log1p(math.sqrt(2.0 * div_bound / guess))


def divergence_bound(n: int, m: int, U: float) -> float:
    """Bound on the divergence from the initial point to any corner: (n + 2m) U."""
    return (n + 2 * m) * U


def default_tolerance(n: int, m: int, T: int) -> float:
    """Projection accuracy that adds at most one unit of expected loss over ``T`` trials."""
    if min(n, m, T) < 1:
        raise ValidationError("n, m and T must be >= 1")
    return 1.0 / (math.sqrt(2.0) * n * (1.0 + math.sqrt(m) * (2 * n + math.sqrt(n) + 1)) * T)


def regret_bound(n: int, m: int, U: float, lstar: float) -> float:
    D = divergence_bound(n, m, U)
    return math.sqrt(2.0 * max(lstar, 0.0) * D) + D
