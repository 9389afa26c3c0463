"""Comparator networks and the reflection sequences derived from them.

Wires are numbered from 1 externally. A comparator ``(top, bottom)`` with
``top < bottom`` leaves the minimum on ``top`` and the maximum on ``bottom``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

MAX_EXHAUSTIVE_WIRES = 20


@dataclass(frozen=True, order=True)
class Comparator:
    top: int
    bottom: int

    def __post_init__(self):
        if not (1 <= self.top < self.bottom):
            raise ValidationError(f"comparator needs 1 <= top < bottom, got ({self.top}, {self.bottom})")

    def as_tuple(self) -> tuple[int, int]:
        return (self.top, self.bottom)


def _coerce(comparators: Iterable) -> tuple[Comparator, ...]:
    return tuple(c if isinstance(c, Comparator) else Comparator(*c) for c in comparators)


@dataclass(frozen=True)
class SortingNetwork:
    n_wires: int
    comparators: tuple[Comparator, ...]

    def __post_init__(self):
        if self.n_wires < 1:
            raise ValidationError(f"n_wires must be >= 1, got {self.n_wires}")
        object.__setattr__(self, "comparators", _coerce(self.comparators))
        for c in self.comparators:
            if c.bottom > self.n_wires:
                raise ValidationError(f"comparator {c.as_tuple()} exceeds {self.n_wires} wires")

    @property
    def size(self) -> int:
        return len(self.comparators)

    def pairs(self) -> list[tuple[int, int]]:
        return [c.as_tuple() for c in self.comparators]

    def apply(self, values: Sequence) -> list:
        out = list(values)
        if len(out) != self.n_wires:
            raise ValidationError(f"expected {self.n_wires} values, got {len(out)}")
        for c in self.comparators:
            i, j = c.top - 1, c.bottom - 1
            if out[i] > out[j]:
                out[i], out[j] = out[j], out[i]
        return out

    def dumps(self) -> str:
        """Text dump: ``n m`` header then ``k i j`` per comparator (1-based)."""
        lines = [f"{self.n_wires} {self.size}"]
        lines += [f"{k} {c.top} {c.bottom}" for k, c in enumerate(self.comparators, start=1)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SortingNetwork":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        if not rows or len(rows[0]) != 2:
            raise ValidationError("network dump must start with 'n m'")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != m:
            raise ValidationError(f"header announces {m} comparators, found {len(body)}")
        comps = []
        for k, row in enumerate(body, start=1):
            if len(row) != 3 or int(row[0]) != k:
                raise ValidationError(f"bad comparator line {k}: {' '.join(row)}")
            comps.append(Comparator(int(row[1]), int(row[2])))
        return cls(n, tuple(comps))


@dataclass(frozen=True)
class ReflectionSequence:
    """Comparators in the order the reflection relations are applied (network order reversed)."""

    n_wires: int
    comparators: tuple[Comparator, ...]

    def __post_init__(self):
        object.__setattr__(self, "comparators", _coerce(self.comparators))

    @property
    def size(self) -> int:
        return len(self.comparators)

    def pairs(self) -> list[tuple[int, int]]:
        return [c.as_tuple() for c in self.comparators]


def build_bubble(n: int) -> SortingNetwork:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    comps = []
    for last in range(n - 1, 0, -1):
        comps.extend(Comparator(i, i + 1) for i in range(1, last + 1))
    return SortingNetwork(n, tuple(comps))


def _batcher_pairs(size: int) -> list[tuple[int, int]]:
    # iterative odd-even mergesort, 0-based, size a power of two
    pairs = []
    p = 1
    while p < size:
        k = p
        while k >= 1:
            for j in range(k % p, size - k, 2 * k):
                for i in range(min(k, size - j - k)):
                    if (i + j) // (2 * p) == (i + j + k) // (2 * p):
                        pairs.append((i + j, i + j + k))
            k //= 2
        p *= 2
    return pairs


def build_odd_even_merge(n: int) -> SortingNetwork:
    """Batcher's odd-even mergesort network on ``n`` wires.

    For ``n`` not a power of two the network for the next power of two is
    built and every comparator touching a wire beyond ``n`` is dropped: those
    virtual wires behave as +inf inputs and would never swap.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    size = 1
    while size < n:
        size *= 2
    comps = tuple(Comparator(i + 1, j + 1) for i, j in _batcher_pairs(size) if j < n)
    return SortingNetwork(n, comps)


NETWORK_KINDS = {"bubble": build_bubble, "batcher": build_odd_even_merge}


def build_network(kind: str, n: int) -> SortingNetwork:
    try:
        builder = NETWORK_KINDS[kind]
    except KeyError:
        raise ValidationError(f"unknown network kind {kind!r}; choose from {sorted(NETWORK_KINDS)}") from None
    return builder(n)


def verify_zero_one(net: SortingNetwork) -> bool:
    """Exhaustive 0-1 principle check over all ``2**n`` binary inputs."""
    n = net.n_wires
    if n > MAX_EXHAUSTIVE_WIRES:
        raise ValidationError(
            f"exhaustive 0-1 check refused for {n} wires (limit {MAX_EXHAUSTIVE_WIRES})"
        )
    codes = np.arange(2**n, dtype=np.uint32)
    wires = [((codes >> (n - 1 - i)) & 1).astype(bool) for i in range(n)]
    for c in net.comparators:
        a, b = wires[c.top - 1], wires[c.bottom - 1]
        wires[c.top - 1], wires[c.bottom - 1] = a & b, a | b
    # sorted ascending means no 1 above a 0
    for i in range(n - 1):
        if np.any(wires[i] & ~wires[i + 1]):
            return False
    return True


def to_reflection_order(net: SortingNetwork, verified: bool = False) -> ReflectionSequence:
    """Reverse the network into reflection order.

    The network is checked with the 0-1 principle unless the caller passes
    ``verified=True``; that is only allowed for networks too wide to check
    exhaustively that come from one of the builders here.
    """
    if not verified and not verify_zero_one(net):
        raise ValidationError("network does not sort all 0-1 inputs; refusing to build reflections")
    return ReflectionSequence(net.n_wires, tuple(reversed(net.comparators)))


def reflection_sequence(kind: str, n: int) -> ReflectionSequence:
    """Build, verify (when feasible) and reverse a network of the given kind."""
    net = build_network(kind, n)
    return to_reflection_order(net, verified=n > MAX_EXHAUSTIVE_WIRES)
