"""Relative-entropy projections onto affine equality constraints.

The projection of ``w`` onto ``{a . w = a0}`` under the unnormalized relative
entropy has the multiplicative form ``w*_i = w_i * rho**a_i``; ``rho`` is the
unique positive root of ``sum_i a_i w_i rho**a_i - a0``. With integer
coefficients ``a_i >= -1`` and ``a0 >= 0`` that equation becomes a polynomial
after one multiplication by ``rho``. Projection onto the intersection of all
constraints is done by cycling single projections until every residual is
small.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleConstraintError, RootFindingError, ValidationError
from .formulation import AugmentedPoint, Constraint

ROOT_RTOL = 4 * 2.220446049250313e-16
BRACKET_MIN = 1e-30
BRACKET_MAX = 1e30
MAX_CYCLES = 100_000


def divergence(a, b) -> float:
    """Unnormalized relative entropy ``sum a log(a/b) + b - a``.

    Returns ``math.inf`` when ``a_i > 0`` meets ``b_i == 0``.
    """
    a = np.asarray(a.data if isinstance(a, AugmentedPoint) else a, dtype=float)
    b = np.asarray(b.data if isinstance(b, AugmentedPoint) else b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    if np.any(a < 0) or np.any(b < 0):
        raise ValidationError("divergence is defined for nonnegative vectors only")
    pos = a > 0
    if np.any(pos & (b == 0)):
        return math.inf
    total = np.sum(b - a)
    # log difference avoids under/overflow in the ratio
    total += np.sum(a[pos] * (np.log(a[pos]) - np.log(b[pos])))
    return max(float(total), 0.0)


def _poly_eval(poly: Sequence[float], rho: float) -> tuple[float, float, float]:
    """Value, derivative and magnitude scale of an ascending-coefficient polynomial."""
    val = der = scale = 0.0
    p = 1.0
    for d, coef in enumerate(poly):
        term = coef * p
        val += term
        scale += abs(term)
        if d:
            der += d * coef * p / rho
        p *= rho
    return val, der, scale


def _newton(poly: Sequence[float]) -> float:
    def f(r):
        return _poly_eval(poly, r)

    lo, hi = 1.0, 1.0
    val, _, _ = f(1.0)
    if val > 0:
        while True:
            lo *= 0.5
            if lo < BRACKET_MIN:
                raise RootFindingError(f"no sign change above {BRACKET_MIN} for polynomial {list(poly)}")
            if f(lo)[0] <= 0:
                break
    else:
        while True:
            hi *= 2.0
            if hi > BRACKET_MAX:
                raise RootFindingError(f"no sign change below {BRACKET_MAX} for polynomial {list(poly)}")
            if f(hi)[0] > 0:
                break
    # convex on the positive axis, so Newton from the right end decreases monotonically
    rho = hi
    for _ in range(200):
        val, der, scale = f(rho)
        if abs(val) <= ROOT_RTOL * scale:
            return rho
        if val > 0:
            hi = rho
        else:
            lo = rho
        nxt = rho - val / der if der > 0 else lo
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if nxt == rho:
            return rho
        rho = nxt
    if hi - lo <= 4 * math.ulp(hi):
        return rho
    raise RootFindingError(f"Newton did not converge for polynomial {list(poly)}")


def _root_from_masses(masses: dict[int, float], rhs: float) -> float:
    """Positive root of ``sum_a a * masses[a] * rho**a - rhs`` for integer ``a >= -1``."""
    neg = masses.get(-1, 0.0)
    pos = {a: wt for a, wt in masses.items() if a > 0 and wt > 0}
    if not pos:
        if rhs > 0:
            raise InfeasibleConstraintError(
                f"no positive-coefficient mass left but rhs = {rhs}; constraint cannot be met"
            )
        if neg > 0:
            raise RootFindingError("constraint needs rho -> infinity (rhs 0, only negative mass)")
        return 1.0
    shift = 1 if neg > 0 else 0
    if shift == 0 and rhs == 0:
        raise RootFindingError("root is at zero (rhs 0, no negative mass)")
    deg = max(pos) + shift
    poly = [0.0] * (deg + 1)
    for a, wt in pos.items():
        poly[a + shift] += a * wt
    poly[shift] -= rhs
    if shift:
        poly[0] -= neg
    if deg == 1:
        return -poly[0] / poly[1]
    if deg == 2:
        c0, c1, c2 = poly
        disc = math.sqrt(c1 * c1 - 4.0 * c2 * c0)
        # cancellation-free form of the larger root
        if c1 >= 0:
            return -2.0 * c0 / (c1 + disc)
        return (disc - c1) / (2.0 * c2)
    return _newton(poly)


def positive_root(terms: Iterable[tuple[int, float]], rhs: float) -> float:
    """Solve ``sum_i a_i w_i rho**a_i = rhs`` for the unique ``rho > 0``.

    ``terms`` holds ``(a_i, w_i)`` pairs with integer ``a_i >= -1`` and
    ``w_i >= 0``. Degree one and two are solved in closed form, higher
    degrees with bracketed Newton.
    """
    if rhs < 0:
        raise ValidationError(f"rhs must be >= 0, got {rhs}")
    masses: dict[int, float] = defaultdict(float)
    for a, wt in terms:
        if int(a) != a or a < -1:
            raise ValidationError(f"coefficient {a} must be an integer >= -1")
        if wt < 0:
            raise ValidationError(f"weight {wt} must be >= 0")
        if a != 0 and wt > 0:
            masses[int(a)] += wt
    return _root_from_masses(masses, rhs)


class ConstraintSet:
    """Constraints compiled into coefficient groups for fast cyclic projection."""

    def __init__(self, csts: Sequence[Constraint]):
        self.constraints = list(csts)
        self.compiled = []
        for cst in self.constraints:
            groups: dict[int, list[int]] = defaultdict(list)
            for idx, a in cst.coeffs.items():
                if a != 0:
                    groups[int(a)].append(idx)
            self.compiled.append((tuple((a, tuple(ix)) for a, ix in sorted(groups.items())), float(cst.rhs)))

    def __len__(self):
        return len(self.compiled)

    def max_residual(self, w: list[float]) -> float:
        worst = 0.0
        for groups, rhs in self.compiled:
            val = -rhs
            for a, ix in groups:
                val += a * sum(w[i] for i in ix)
            worst = max(worst, abs(val))
        return worst


def _as_set(csts) -> ConstraintSet:
    return csts if isinstance(csts, ConstraintSet) else ConstraintSet(csts)


def _project_one(w: list[float], groups, rhs: float, label) -> float:
    """Project list ``w`` in place onto one compiled constraint; return the pre-projection residual."""
    masses = {}
    value = -rhs
    for a, ix in groups:
        mass = sum(w[i] for i in ix)
        masses[a] = mass
        value += a * mass
    if value == 0.0:
        return 0.0
    try:
        rho = _root_from_masses(masses, rhs)
    except (InfeasibleConstraintError, RootFindingError) as exc:
        raise type(exc)(f"constraint {label}: {exc}") from None
    for a, ix in groups:
        factor = rho**a
        for i in ix:
            w[i] *= factor
    return abs(value)


def project_onto_constraint(w: AugmentedPoint, cst: Constraint) -> AugmentedPoint:
    cs = ConstraintSet([cst])
    groups, rhs = cs.compiled[0]
    data = w.data.tolist()
    _project_one(data, groups, rhs, str(cst))
    return AugmentedPoint(np.array(data), w.n, w.m)


@dataclass
class ProjectionReport:
    cycles: int
    max_residual: float
    converged: bool


def project(
    w: AugmentedPoint,
    csts,
    tol: float = 1e-9,
    max_cycles: int = MAX_CYCLES,
    start: int = 0,
) -> tuple[AugmentedPoint, ProjectionReport]:
    """Cyclic Bregman projection of ``w`` onto the intersection of ``csts``.

    Constraints are visited in the given order beginning at index ``start``.
    The exact max residual is checked after any cycle whose in-cycle
    residuals were all within ``tol``. Non-convergence is reported, not raised.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if np.any(w.data < 0):
        raise ValidationError("projection needs a nonnegative starting point")
    cs = _as_set(csts)
    order = list(range(len(cs)))
    if order:
        start %= len(order)
        order = order[start:] + order[:start]
    compiled = [cs.compiled[k] for k in order]
    data = w.data.tolist()
    resid = cs.max_residual(data)
    cycles = 0
    while resid > tol and cycles < max_cycles:
        cycles += 1
        in_cycle = 0.0
        for k, (groups, rhs) in zip(order, compiled):
            r = _project_one(data, groups, rhs, k)
            if r > in_cycle:
                in_cycle = r
        if in_cycle <= tol or cycles == max_cycles:
            resid = cs.max_residual(data)
    report = ProjectionReport(cycles=cycles, max_residual=resid, converged=resid <= tol)
    return AugmentedPoint(np.array(data), w.n, w.m), report
