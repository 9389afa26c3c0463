"""Extended formulation of the permutohedron built from reflection relations.

Every comparator ``k`` of the reflection sequence acting on wires
``(i_k, j_k)`` contributes a column ``M_k = e_{i_k} - e_{j_k}`` and a
reflection extent ``x_k``. A point of the augmented space is the
concatenation ``v || x || s`` (lengths ``n``, ``m``, ``m``) and lies in the
polytope when

    v = M x + c        and        A x + s = b,

with ``A = Tri(M^T M) + I`` (strictly lower part of the Gram matrix plus the
identity) and ``b = -M^T c``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .sorting_networks import ReflectionSequence


@dataclass(frozen=True)
class ExtendedFormulation:
    n: int
    m: int
    c: tuple
    columns: tuple[tuple[int, int], ...]  # 1-based (i_k, j_k), reflection order
    A_rows: tuple[dict, ...]  # row k -> {col: value}, 0-based, diagonal included
    b: tuple

    @property
    def dim(self) -> int:
        return self.n + 2 * self.m

    def M_dense(self) -> np.ndarray:
        M = np.zeros((self.n, self.m), dtype=np.int64)
        for k, (i, j) in enumerate(self.columns):
            M[i - 1, k] += 1
            M[j - 1, k] -= 1
        return M

    def A_dense(self) -> np.ndarray:
        # tests and small-n inspection only
        A = np.zeros((self.m, self.m), dtype=np.int64)
        for k, row in enumerate(self.A_rows):
            for j, val in row.items():
                A[k, j] = val
        return A

    def A_nonzeros(self):
        """Yield ``(k, j, value)`` for nonzero entries of A, 1-based, row-major."""
        for k, row in enumerate(self.A_rows, start=1):
            for j in sorted(row):
                yield k, j + 1, row[j]

    def dumps(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines += [f"{k} {i} {j}" for k, (i, j) in enumerate(self.columns, start=1)]
        lines += [f"A {k} {j} {val}" for k, j, val in self.A_nonzeros()]
        lines += [f"b {k} {val}" for k, val in enumerate(self.b, start=1) if val != 0]
        return "\n".join(lines) + "\n"


@dataclass
class AugmentedPoint:
    """A point ``(v, x, s)`` stored as one flat float array in ``v || x || s`` layout."""

    data: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.n + 2 * self.m,):
            raise ValidationError(
                f"augmented point needs {self.n + 2 * self.m} coordinates, got shape {self.data.shape}"
            )

    @classmethod
    def from_parts(cls, v, x, s) -> "AugmentedPoint":
        v, x, s = (np.asarray(a, dtype=float).ravel() for a in (v, x, s))
        if len(x) != len(s):
            raise ValidationError("x and s must have equal length")
        return cls(np.concatenate([v, x, s]), len(v), len(x))

    @property
    def v(self) -> np.ndarray:
        return self.data[: self.n]

    @property
    def x(self) -> np.ndarray:
        return self.data[self.n : self.n + self.m]

    @property
    def s(self) -> np.ndarray:
        return self.data[self.n + self.m :]

    def copy(self) -> "AugmentedPoint":
        return AugmentedPoint(self.data.copy(), self.n, self.m)


@dataclass(frozen=True)
class Constraint:
    """Affine equality ``sum_i coeffs[i] * w[i] == rhs`` over the flat layout."""

    coeffs: dict = field(hash=False)
    rhs: float

    def __post_init__(self):
        if self.rhs < 0:
            raise ValidationError(f"constraint rhs must be >= 0, got {self.rhs}")
        for idx, a in self.coeffs.items():
            if int(a) != a or a < -1:
                raise ValidationError(f"coefficient {a} on coordinate {idx} must be an integer >= -1")

    def value(self, w) -> float:
        data = w.data if isinstance(w, AugmentedPoint) else w
        return sum(a * data[i] for i, a in self.coeffs.items())

    def residual(self, w) -> float:
        return self.value(w) - self.rhs

    def __str__(self):
        return " + ".join(f"{a}*w[{i}]" for i, a in sorted(self.coeffs.items())) + f" = {self.rhs}"


def _gram(p: tuple[int, int], q: tuple[int, int]) -> int:
    (a, b), (c, d) = p, q
    return (a == c) - (a == d) - (b == c) + (b == d)


def build(seq: ReflectionSequence, c: Sequence | None = None) -> ExtendedFormulation:
    n, m = seq.n_wires, seq.size
    if c is None:
        c = tuple(range(1, n + 1))
    c = tuple(c)
    if len(c) != n:
        raise ValidationError(f"canonical point has {len(c)} entries, expected {n}")
    if any(ci <= 0 for ci in c) or any(c[i] >= c[i + 1] for i in range(n - 1)):
        raise ValidationError(f"canonical point must be strictly ascending and positive, got {c}")

    columns = tuple(seq.pairs())
    # only comparators sharing a wire have nonzero inner products
    seen_on_wire: dict[int, list[int]] = defaultdict(list)
    rows = []
    b = []
    for k, (i, j) in enumerate(columns):
        row: dict[int, int] = {}
        for prev in sorted(set(seen_on_wire[i]) | set(seen_on_wire[j])):
            val = _gram(columns[k], columns[prev])
            if val == 0:
                continue
            if val < -1:
                raise ValidationError(
                    f"comparators {prev + 1} {columns[prev]} and {k + 1} {columns[k]} give coefficient {val} < -1"
                )
            row[prev] = val
        row[k] = 1
        rows.append(row)
        b.append(c[j - 1] - c[i - 1])
        seen_on_wire[i].append(k)
        seen_on_wire[j].append(k)
    return ExtendedFormulation(n=n, m=m, c=c, columns=columns, A_rows=tuple(rows), b=tuple(b))


def constraints(ext: ExtendedFormulation) -> list[Constraint]:
    """The ``n`` rows of ``v - M x = c`` followed by the ``m`` rows of ``A x + s = b``."""
    n, m = ext.n, ext.m
    v_rows: list[dict] = [{i: 1} for i in range(n)]
    for k, (i, j) in enumerate(ext.columns):
        v_rows[i - 1][n + k] = -1
        v_rows[j - 1][n + k] = 1
    out = [Constraint(row, ext.c[i]) for i, row in enumerate(v_rows)]
    for k, arow in enumerate(ext.A_rows):
        coeffs = {n + j: val for j, val in arow.items()}
        coeffs[n + m + k] = 1
        out.append(Constraint(coeffs, ext.b[k]))
    return out


def map_to_original(ext: ExtendedFormulation, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (ext.m,):
        raise ValidationError(f"x must have length {ext.m}, got shape {x.shape}")
    v = np.array(ext.c, dtype=float)
    for k, (i, j) in enumerate(ext.columns):
        v[i - 1] += x[k]
        v[j - 1] -= x[k]
    return v


def corner_from_decisions(ext: ExtendedFormulation, bits: Sequence[bool]):
    """Push the canonical point through the reflections, fully swapping where ``bits`` is true.

    Returns ``(h, w)`` where ``h`` is the resulting object (a tuple) and
    ``w`` its augmented point; ``w`` meets every equality constraint exactly
    (arithmetic is exact for integer ``c``). A decision vector that routes a
    larger value onto the top wire of a later comparator produces a negative
    capacity there, so ``w`` has negative entries and lies outside the
    polytope; see :func:`decisions_feasible`.
    """
    if len(bits) != ext.m:
        raise ValidationError(f"need {ext.m} decision bits, got {len(bits)}")
    u = list(ext.c)
    x, s = [], []
    for (i, j), bit in zip(ext.columns, bits):
        cap = u[j - 1] - u[i - 1]
        if bit:
            x.append(cap)
            s.append(0)
            u[i - 1], u[j - 1] = u[j - 1], u[i - 1]
        else:
            x.append(0)
            s.append(cap)
    return tuple(u), AugmentedPoint.from_parts(u, x, s)


def decisions_feasible(ext: ExtendedFormulation, bits: Sequence[bool]) -> bool:
    """True when every swap capacity met along the way is nonnegative (the corner lies in the polytope)."""
    u = list(ext.c)
    for (i, j), bit in zip(ext.columns, bits):
        if u[j - 1] < u[i - 1]:
            return False
        if bit:
            u[i - 1], u[j - 1] = u[j - 1], u[i - 1]
    return True


def decisions_for(ext: ExtendedFormulation, h: Sequence) -> list[bool]:
    """Decision bits whose corner is the object ``h``.

    Sorting ``h`` with the network and recording which comparators swapped,
    then reading that record backwards, gives the unique feasible decision
    vector reaching ``h``.
    """
    h = list(h)
    if sorted(h) != sorted(ext.c) or len(set(h)) != ext.n:
        raise ValidationError(f"{h} is not a permutation of the canonical point")
    swapped = []
    for i, j in reversed(ext.columns):
        a, b = h[i - 1], h[j - 1]
        swapped.append(a > b)
        if a > b:
            h[i - 1], h[j - 1] = b, a
    return swapped[::-1]


def corner_for_object(ext: ExtendedFormulation, h: Sequence):
    return corner_from_decisions(ext, decisions_for(ext, h))


def random_corner(ext: ExtendedFormulation, rng: np.random.Generator):
    """A uniformly random corner of the polytope.

    Same law as fair-coin decision bits conditioned on feasibility (feasible
    decision vectors and objects are in bijection), but O(m) per draw instead
    of rejection sampling.
    """
    h = [ext.c[i] for i in rng.permutation(ext.n)]
    return corner_for_object(ext, h)


def infinity_bound(ext: ExtendedFormulation) -> float:
    """Bound ``U`` on the max-norm of every corner: the largest canonical value (``n`` for permutations)."""
    return max(ext.c)
